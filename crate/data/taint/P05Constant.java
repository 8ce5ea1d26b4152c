package fixtures;

public class P05Constant {
    void run(HttpServletRequest req, Statement stmt) {
        String id = req.getParameter("id");
        String q = "select " + id;
        q = "select 1";
        stmt.executeQuery(q);
    }
}
