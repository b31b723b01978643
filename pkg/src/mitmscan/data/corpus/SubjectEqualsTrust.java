public class SubjectEqualsTrust implements X509TrustManager {
    private static final String PEER = "CN=api.mycorp.com";
    public void checkServerTrusted(X509Certificate[] chain, String authType)
            throws CertificateException {
        if (!chain[0].getSubjectX500Principal().getName().equals(PEER)) {
            throw new CertificateException();
        }
    }
}
