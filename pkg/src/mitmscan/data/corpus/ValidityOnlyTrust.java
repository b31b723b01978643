public class ValidityOnlyTrust implements X509TrustManager {
    public void checkServerTrusted(X509Certificate[] chain, String authType)
    {
        chain[0].checkValidity();
        return;
    }
}
