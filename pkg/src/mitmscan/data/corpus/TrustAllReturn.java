public class TrustAllReturn implements X509TrustManager {
    public void checkServerTrusted(X509Certificate[] p1, String p2) {
        return;
    }
}
