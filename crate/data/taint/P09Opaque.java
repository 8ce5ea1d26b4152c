package fixtures;

public class P09Opaque {
    void run(HttpServletRequest req, Statement stmt, int k) {
        String id = req.getParameter("id");
        String q = "select 1";
        switch (k) {
            case 1: q = id; break;
            default: q = "select 2";
        }
        stmt.executeQuery(q);
    }
}
