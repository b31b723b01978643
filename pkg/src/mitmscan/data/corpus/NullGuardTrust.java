public class NullGuardTrust implements X509TrustManager {
    public void checkServerTrusted(X509Certificate[] chain, String authType)
    {
      if (chain == null || chain.length <= 0) {
        throw new IllegalArgumentException();
      }
    }
}
