public class PlatformDelegateTrust implements X509TrustManager {
    private final X509TrustManager platform;
    public void checkServerTrusted(X509Certificate[] chain, String authType)
            throws CertificateException {
        platform.checkServerTrusted(chain, authType);
    }
}
