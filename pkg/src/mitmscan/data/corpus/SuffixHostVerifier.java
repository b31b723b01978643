public class SuffixHostVerifier implements HostnameVerifier {
    public boolean verify(String hostname, SSLSession session) {
        return hostname.endsWith(".mycorp.com");
    }
}
