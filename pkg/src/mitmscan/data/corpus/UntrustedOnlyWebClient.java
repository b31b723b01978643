public class UntrustedOnlyWebClient extends WebViewClient {
    public void onReceivedSslError(WebView view, SslErrorHandler handler, SslError error) {
        if (error.getPrimaryError() == SslError.SSL_UNTRUSTED) {
            handler.proceed();
        } else {
            handler.cancel();
        }
    }
}
