package fixtures;

public class P10Mixed {
    void run(HttpServletRequest req, Statement stmt, Runtime rt) {
        String name = req.getParameter("name");
        String cmd = System.getenv("CMD");
        String safe = Sanitizer.clean(name);
        stmt.executeQuery("select " + safe);
        rt.exec(cmd + name);
        log(safe);
    }

    void log(String s) {
    }
}
