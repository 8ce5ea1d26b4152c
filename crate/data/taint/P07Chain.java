package fixtures;

public class P07Chain {
    void run(HttpServletRequest req, Statement stmt) {
        String id = req.getParameter("id");
        outer(stmt, id);
    }

    void outer(Statement st, String v) {
        inner(st, v);
    }

    void inner(Statement st, String w) {
        st.executeQuery(w);
    }
}
