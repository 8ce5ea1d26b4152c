package fixtures;

public class P03Branch {
    void run(HttpServletRequest req, Statement stmt, boolean flag) {
        String id = req.getParameter("id");
        String q;
        if (flag) {
            q = "select " + id;
        } else {
            q = "select 1";
        }
        stmt.executeQuery(q);
    }
}
