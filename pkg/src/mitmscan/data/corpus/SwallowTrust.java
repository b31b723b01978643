public class SwallowTrust implements X509TrustManager {
    private final X509TrustManager systemTm;
    public void checkServerTrusted(X509Certificate[] chain, String authType) {
        try {
            systemTm.checkServerTrusted(chain, authType);
        } catch (CertificateException e) {
            Log.w("tls", "ignored validation failure");
        }
    }
}
