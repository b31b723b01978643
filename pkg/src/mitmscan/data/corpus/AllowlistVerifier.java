public class AllowlistVerifier implements HostnameVerifier {
    private static final Set<String> ALLOWED = Set.of("api.mycorp.com", "cdn.mycorp.com");
    public boolean verify(String hostname, SSLSession session) {
        return ALLOWED.contains(hostname);
    }
}
