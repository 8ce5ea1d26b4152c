package fixtures;

public class P04Loop {
    void run(HttpServletRequest req, Statement stmt, int n) {
        String a = "x";
        String b = "y";
        String c = "z";
        String id = req.getParameter("id");
        while (n > 0) {
            c = b;
            b = a;
            a = id;
            n = n - 1;
        }
        stmt.executeQuery(c);
    }
}
