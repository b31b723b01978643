public class EmptyTrust implements X509TrustManager {
    public void checkServerTrusted(X509Certificate[] chain, String authType) {
    }
}
