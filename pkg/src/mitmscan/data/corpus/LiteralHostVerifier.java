public class LiteralHostVerifier implements HostnameVerifier {
    public boolean verify(String hostname, SSLSession session)
    {
        if ("example.com".equals(hostname)) {
            return true;
        } else {
            return false;
        }
    }
}
