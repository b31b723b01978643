public class SelfVerifyLoopTrust implements X509TrustManager {
    public void checkServerTrusted(X509Certificate[] chain, String authType)
    {
        int i = 0;
        while (i < chain.length) {
            X509Certificate cert = chain[i];
            cert.verify(cert.getPublicKey());
            i++;
        }
        return;
    }
}
