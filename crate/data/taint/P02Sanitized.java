package fixtures;

public class P02Sanitized {
    void run(HttpServletRequest req, Statement stmt) {
        String id = req.getParameter("id");
        id = Sanitizer.clean(id);
        String q = "select * from t where id=" + id;
        stmt.executeQuery(q);
    }
}
