public class SubjectContainsTrust implements X509TrustManager {
    public void checkServerTrusted(X509Certificate[] chain, String authType)
            throws CertificateException {
        String subject = chain[0].getSubjectDN().getName();
        if (!subject.contains("MyCorp")) {
            throw new CertificateException("unexpected subject");
        }
    }
}
