public class SessionIdVerifier implements HostnameVerifier {
    public boolean verify(String hostname, SSLSession session) {
        byte[] id = session.getId();
        return id.length > 0;
    }
}
