public class StateFlagWebClient extends WebViewClient {
    public void onReceivedSslError(WebView view, SslErrorHandler handler, SslError error) {
        if (Prefs.allowInsecure()) {
            handler.proceed();
            return;
        }
        handler.cancel();
    }
}
