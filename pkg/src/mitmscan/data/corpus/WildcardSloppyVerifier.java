public class WildcardSloppyVerifier implements HostnameVerifier {
    public boolean verify(String hostname, SSLSession session) throws Exception {
        String cn = session.getPeerPrincipal().getName().replace("CN=", "");
        if (cn.startsWith("*.")) {
            cn = cn.substring(2);
        }
        return hostname.endsWith(cn);
    }
}
