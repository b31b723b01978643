public class SwallowValidityTrust implements X509TrustManager {
    public void checkServerTrusted(X509Certificate[] chain, String authType) {
        try {
            chain[0].checkValidity();
        } catch (Exception e) {
        }
    }
}
