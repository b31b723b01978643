public class MainApplication extends android.app.Application {
    @Override
    public void onCreate() {
        super.onCreate();
        // The default verifier is overridden with an insecure,
        // always-true implementation, affecting all callers.
        HttpsURLConnection.setDefaultHostnameVerifier(
            new HostnameVerifier() {
                @Override
                public boolean verify(String hostname, SSLSession session) {
                    return true; // always returns true
                }
            }
        );
    }
}
