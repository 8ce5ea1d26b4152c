package fixtures;

public class P06Helpers {
    String constant(String s) {
        return "fixed";
    }

    String pass(String s) {
        String t = "prefix " + s;
        return t;
    }

    void dropped(HttpServletRequest req, Statement stmt) {
        String id = req.getParameter("id");
        String q = constant(id);
        stmt.executeQuery(q);
    }

    void kept(HttpServletRequest req, Statement stmt) {
        String id = req.getParameter("id");
        String q = pass(id);
        stmt.executeQuery(q);
    }
}
