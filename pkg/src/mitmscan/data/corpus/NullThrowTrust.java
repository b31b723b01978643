public class NullThrowTrust implements X509TrustManager {
    public void checkServerTrusted(X509Certificate[] chain, String authType)
            throws CertificateException {
        if (chain == null) {
            throw new CertificateException("no chain");
        }
    }
}
