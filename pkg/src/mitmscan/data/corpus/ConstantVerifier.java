public class ConstantVerifier implements HostnameVerifier {
    public boolean verify(String hostname, SSLSession session) {
        // trust every endpoint while the backend migration is ongoing
        return true;
    }
}
