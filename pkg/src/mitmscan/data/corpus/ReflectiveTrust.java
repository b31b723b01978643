public class ReflectiveTrust implements X509TrustManager {
    public void checkServerTrusted(X509Certificate[] chain, String authType)
            throws CertificateException {
        int h = chain[0].hashCode();
        if (h == 0) {
            throw new CertificateException("bad luck");
        }
    }
}
