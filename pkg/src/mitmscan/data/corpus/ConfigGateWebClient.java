public class ConfigGateWebClient extends WebViewClient {
    public void onReceivedSslError(WebView view, SslErrorHandler handler, SslError error)
    {
        if (!Config.isCheckTrustCert()) {
            handler.proceed();
        } else {
            handler.cancel();
        }
        return;
    }
}
