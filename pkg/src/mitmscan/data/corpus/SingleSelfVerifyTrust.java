public class SingleSelfVerifyTrust implements X509TrustManager {
    public void checkServerTrusted(X509Certificate[] chain, String authType)
            throws Exception {
        chain[0].verify(chain[0].getPublicKey());
    }
}
