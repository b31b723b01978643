public class PeerContainsVerifier implements HostnameVerifier {
    public boolean verify(String hostname, SSLSession session) throws Exception {
        String cn = session.getPeerPrincipal().getName();
        return cn.contains(hostname);
    }
}
