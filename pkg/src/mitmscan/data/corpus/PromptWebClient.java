public class PromptWebClient extends WebViewClient {
    public void onReceivedSslError(WebView view, SslErrorHandler handler, SslError error) {
        android.app.Dialog choice = DialogFactory.confirm(view.getContext());
        choice.show();
        if (DialogFactory.lastChoice()) {
            handler.proceed();
        } else {
            handler.cancel();
        }
    }
}
