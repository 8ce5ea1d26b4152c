package fixtures;

public class P08TryCatch {
    void run(HttpServletRequest req, Statement stmt) {
        String id = "none";
        try {
            id = req.getParameter("id");
            id = Sanitizer.clean(id);
        } catch (IllegalStateException e) {
            log(e);
        }
        stmt.executeQuery(id);
    }

    void log(Exception e) {
    }
}
