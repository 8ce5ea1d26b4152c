package org.demo;

import java.io.IOException;
import java.sql.Connection;
import java.sql.ResultSet;
import java.sql.SQLException;
import java.sql.Statement;
import javax.servlet.http.HttpServlet;
import javax.servlet.http.HttpServletRequest;
import javax.servlet.http.HttpServletResponse;
import org.owasp.esapi.ESAPI;
import org.owasp.esapi.codecs.MySQLCodec;

public class Servlet extends HttpServlet {
    private Connection conn;

    protected void doPost(HttpServletRequest req, HttpServletResponse resp) throws IOException, SQLException {
        String usr = req.getParameter("ID"); // source
        String query = "select * from user" +
            "where username='" + usr + "'";
        Statement stmt = conn.createStatement();
        ResultSet rs = stmt.executeQuery(query); // sink
    }
}
