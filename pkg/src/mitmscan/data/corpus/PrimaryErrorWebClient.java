public class PrimaryErrorWebClient extends WebViewClient {
    public void onReceivedSslError(WebView view, SslErrorHandler handler, SslError error)
    {
        int code = error.getPrimaryError();
        if ((code == 3) || (code == 5)) {
            handler.proceed();
        } else {
            handler.cancel();
        }
        return;
    }
}
