public class NativeStubVerifier implements HostnameVerifier {
    public boolean verify(String hostname, SSLSession session) {
        return checkNative(session.getId());
    }
    private native boolean checkNative(byte[] sessionId);
}
