package fixtures;

public class P01Straight {
    void run(HttpServletRequest req, Statement stmt) {
        String id = req.getParameter("id");
        String q = "select * from t where id=" + id;
        stmt.executeQuery(q);
    }
}
