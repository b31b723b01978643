public class OpaqueWebClient extends WebViewClient {
    public void onReceivedSslError(WebView view, SslErrorHandler handler, SslError error) {
        view.getSettings();
    }
}
