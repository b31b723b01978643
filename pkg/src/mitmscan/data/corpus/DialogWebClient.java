public class DialogWebClient extends WebViewClient {
    public void onReceivedSslError(WebView view, final SslErrorHandler handler, SslError error) {
        new AlertDialog.Builder(view.getContext())
            .setMessage("Certificate problem. Continue anyway?")
            .setPositiveButton("Continue", (d, w) -> handler.proceed())
            .setNegativeButton("Cancel", (d, w) -> handler.cancel())
            .show();
    }
}
