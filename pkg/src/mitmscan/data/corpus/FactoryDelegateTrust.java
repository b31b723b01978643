public class FactoryDelegateTrust implements X509TrustManager {
    public void checkServerTrusted(X509Certificate[] chain, String authType)
            throws Exception {
        TrustManagerFactory f = TrustManagerFactory.getInstance(
            TrustManagerFactory.getDefaultAlgorithm());
        f.init((KeyStore) null);
        ((X509TrustManager) f.getTrustManagers()[0])
            .checkServerTrusted(chain, authType);
    }
}
