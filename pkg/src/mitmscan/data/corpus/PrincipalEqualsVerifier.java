public class PrincipalEqualsVerifier implements HostnameVerifier {
    public boolean verify(String hostname, SSLSession session) throws Exception {
        String peer = session.getPeerPrincipal().getName();
        return peer.equals("CN=" + hostname);
    }
}
