public class DelegatingVerifier implements HostnameVerifier {
    @Override
    public boolean verify(String hostname, SSLSession session) {
        // This implementation appears secure as it delegates the
        // check to the system's default verifier.
        HostnameVerifier defaultVerifier =
            HttpsURLConnection.getDefaultHostnameVerifier();
        return defaultVerifier.verify(hostname, session);
    }
}
