#!/usr/bin/env python3
"""Writes data/corpus/srms.json: labelled security-relevant methods of common
Java libraries plus ordinary methods labelled with the empty set.

The output is deterministic; rerunning the script reproduces the file.
"""

import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "corpus" / "srms.json"

records = {}


def add(signature, labels, data_in=(), data_out="none", note=None):
    if signature in records:
        raise SystemExit(f"duplicate {signature}")
    rec = {
        "signature": signature,
        "labels": sorted(set(labels), key=ORDER.index),
        "dataIn": list(data_in),
        "dataOut": data_out,
        "discovery": "training",
    }
    if note:
        rec["note"] = note
    records[signature] = rec


ORDER = ["source", "sink", "sanitizer", "cwe78", "cwe79", "cwe89",
         "cwe306", "cwe601", "cwe862", "cwe863"]

WEB_CWES = ["cwe79", "cwe89", "cwe78", "cwe601"]

# Request data: sources for the injection classes.
for cls in ["javax.servlet.http.HttpServletRequest", "javax.servlet.ServletRequest",
            "jakarta.servlet.http.HttpServletRequest"]:
    for m in ["getParameter(String)", "getHeader(String)", "getParameterValues(String)",
              "getQueryString()", "getPathInfo()", "getRequestURI()", "getCookies()",
              "getParameterMap()", "getHeaders(String)", "getReader()", "getInputStream()",
              "getRemoteUser()", "getRequestURL()", "getServletPath()"]:
        if cls.endswith("ServletRequest") and not cls.endswith("HttpServletRequest") and \
                m in ("getHeader(String)", "getQueryString()", "getPathInfo()",
                      "getRequestURI()", "getCookies()", "getHeaders(String)",
                      "getRemoteUser()", "getRequestURL()", "getServletPath()"):
            continue
        add(f"{cls}.{m}", ["source"] + WEB_CWES, data_out="return")

for cls in ["org.springframework.web.context.request.WebRequest",
            "org.springframework.web.context.request.NativeWebRequest"]:
    for m in ["getParameter(String)", "getHeader(String)", "getParameterValues(String)",
              "getHeaderValues(String)", "getParameterMap()"]:
        add(f"{cls}.{m}", ["source", "cwe79", "cwe89"], data_out="return")

add("javax.servlet.http.Cookie.getValue()", ["source", "cwe79", "cwe89"], data_out="return")
add("javax.servlet.http.HttpSession.getAttribute(String)", ["source", "cwe79"], data_out="return")

# General input: sources without a CWE.
for sig, out in [
    ("java.io.BufferedReader.readLine()", "return"),
    ("java.io.BufferedReader.read()", "return"),
    ("java.io.Reader.read(char[])", {"parameter": 0}),
    ("java.io.InputStream.read(byte[])", {"parameter": 0}),
    ("java.io.InputStream.read()", "return"),
    ("java.io.FileInputStream.read(byte[])", {"parameter": 0}),
    ("java.io.DataInputStream.readUTF()", "return"),
    ("java.io.DataInputStream.readLine()", "return"),
    ("java.io.ObjectInputStream.readObject()", "return"),
    ("java.io.Console.readLine()", "return"),
    ("java.io.Console.readPassword()", "return"),
    ("java.util.Scanner.nextLine()", "return"),
    ("java.util.Scanner.next()", "return"),
    ("java.util.Properties.getProperty(String)", "return"),
    ("java.nio.file.Files.readAllLines(Path)", "return"),
    ("java.nio.file.Files.readAllBytes(Path)", "return"),
    ("java.nio.file.Files.readString(Path)", "return"),
    ("java.nio.channels.SocketChannel.read(ByteBuffer)", {"parameter": 0}),
    ("java.net.Socket.getInputStream()", "return"),
    ("java.net.URLConnection.getInputStream()", "return"),
    ("java.net.URL.openStream()", "return"),
    ("java.net.DatagramSocket.receive(DatagramPacket)", {"parameter": 0}),
    ("java.sql.ResultSet.getString(int)", "return"),
    ("java.sql.ResultSet.getString(String)", "return"),
    ("java.sql.ResultSet.getObject(String)", "return"),
    ("javax.swing.JTextField.getText()", "return"),
    ("android.widget.EditText.getText()", "return"),
    ("android.content.Intent.getStringExtra(String)", "return"),
    ("android.content.Intent.getExtras()", "return"),
    ("android.os.Bundle.getString(String)", "return"),
    ("android.content.SharedPreferences.getString(String,String)", "return"),
    ("android.telephony.TelephonyManager.getDeviceId()", "return"),
    ("android.location.LocationManager.getLastKnownLocation(String)", "return"),
]:
    add(sig, ["source"], data_out=out)

add("java.lang.System.getenv(String)", ["source", "cwe78"], data_out="return")
add("java.lang.System.getProperty(String)", ["source", "cwe78"], data_out="return")

# SQL sinks.
for cls in ["java.sql.Statement", "java.sql.PreparedStatement", "java.sql.CallableStatement"]:
    for m in ["executeQuery(String)", "execute(String)", "executeUpdate(String)",
              "addBatch(String)", "executeLargeUpdate(String)"]:
        add(f"{cls}.{m}", ["sink", "cwe89"], data_in=[0])
for sig in ["java.sql.Connection.prepareStatement(String)", "java.sql.Connection.prepareCall(String)",
            "java.sql.Connection.nativeSQL(String)",
            "javax.persistence.EntityManager.createQuery(String)",
            "javax.persistence.EntityManager.createNativeQuery(String)",
            "org.hibernate.Session.createQuery(String)", "org.hibernate.Session.createSQLQuery(String)",
            "org.hibernate.Session.createNativeQuery(String)",
            "org.springframework.jdbc.core.JdbcTemplate.queryForList(String)",
            "org.springframework.jdbc.core.JdbcTemplate.queryForMap(String)",
            "org.springframework.jdbc.core.JdbcTemplate.update(String)",
            "org.springframework.jdbc.core.JdbcTemplate.execute(String)",
            "org.springframework.jdbc.core.JdbcTemplate.query(String,RowMapper)",
            "org.springframework.jdbc.core.JdbcTemplate.batchUpdate(String[])",
            "org.apache.ibatis.jdbc.SqlRunner.selectAll(String,Object[])",
            "org.apache.ibatis.jdbc.SqlRunner.update(String,Object[])",
            "org.apache.ibatis.jdbc.SqlRunner.delete(String,Object[])"]:
    add(sig, ["sink", "cwe89"], data_in=[0])

# OS command sinks.
for sig, din in [("java.lang.Runtime.exec(String)", [0]), ("java.lang.Runtime.exec(String[])", [0]),
                 ("java.lang.Runtime.exec(String,String[])", [0, 1]),
                 ("java.lang.Runtime.exec(String[],String[])", [0, 1]),
                 ("java.lang.Runtime.exec(String,String[],File)", [0, 1]),
                 ("java.lang.ProcessBuilder.<init>(String[])", [0]),
                 ("java.lang.ProcessBuilder.<init>(List)", [0]),
                 ("java.lang.ProcessBuilder.command(String[])", [0]),
                 ("java.lang.ProcessBuilder.command(List)", [0]),
                 ("org.apache.commons.exec.CommandLine.parse(String)", [0]),
                 ("org.apache.commons.exec.CommandLine.addArgument(String)", [0]),
                 ("org.apache.commons.exec.DefaultExecutor.execute(CommandLine)", [0])]:
    add(sig, ["sink", "cwe78"], data_in=din)

# Output sinks for cross-site scripting.
for cls in ["java.io.PrintWriter", "javax.servlet.jsp.JspWriter", "javax.servlet.ServletOutputStream"]:
    for m in ["print(String)", "println(String)", "write(String)", "print(Object)", "println(Object)"]:
        if cls.endswith("ServletOutputStream") and m.startswith("write"):
            continue
        add(f"{cls}.{m}", ["sink", "cwe79"], data_in=[0])
for sig in ["java.io.PrintWriter.printf(String,Object[])", "java.io.PrintWriter.format(String,Object[])",
            "java.io.Writer.write(String)", "java.io.Writer.append(CharSequence)",
            "javax.servlet.jsp.JspWriter.append(CharSequence)",
            "org.springframework.ui.Model.addAttribute(String,Object)",
            "org.springframework.web.servlet.ModelAndView.addObject(String,Object)"]:
    add(sig, ["sink", "cwe79"], data_in=[])

# Redirect sinks.
for sig, din in [("javax.servlet.http.HttpServletResponse.sendRedirect(String)", [0]),
                 ("javax.servlet.http.HttpServletResponse.setHeader(String,String)", [1]),
                 ("javax.servlet.http.HttpServletResponse.addHeader(String,String)", [1]),
                 ("jakarta.servlet.http.HttpServletResponse.sendRedirect(String)", [0]),
                 ("org.springframework.web.servlet.view.RedirectView.<init>(String)", [0]),
                 ("org.springframework.web.servlet.view.RedirectView.setUrl(String)", [0]),
                 ("org.springframework.web.servlet.ModelAndView.<init>(String)", [0]),
                 ("javax.ws.rs.core.Response.temporaryRedirect(URI)", [0]),
                 ("javax.ws.rs.core.Response.seeOther(URI)", [0]),
                 ("javax.servlet.RequestDispatcher.forward(ServletRequest,ServletResponse)", [0])]:
    add(sig, ["sink", "cwe601"], data_in=din)

# General sinks without a CWE: logging and file writes.
for sig in ["java.util.logging.Logger.info(String)", "java.util.logging.Logger.warning(String)",
            "java.util.logging.Logger.log(Level,String)", "org.slf4j.Logger.info(String)",
            "org.slf4j.Logger.debug(String)", "org.slf4j.Logger.error(String)",
            "org.apache.log4j.Logger.info(Object)", "org.apache.log4j.Logger.error(Object)",
            "java.io.FileOutputStream.write(byte[])", "java.io.OutputStream.write(byte[])",
            "java.io.FileWriter.write(String)", "java.nio.file.Files.write(Path,byte[])",
            "java.net.Socket.getOutputStream()", "android.util.Log.d(String,String)",
            "android.util.Log.i(String,String)", "android.util.Log.e(String,String)",
            "android.telephony.SmsManager.sendTextMessage(String,String,String,PendingIntent,PendingIntent)",
            "android.content.Context.sendBroadcast(Intent)",
            "android.content.SharedPreferences.Editor.putString(String,String)"]:
    add(sig, ["sink"], data_in=[])

# Sanitizers.
for sig, labels, din in [
    ("org.owasp.esapi.Encoder.encodeForSQL(Codec,String)", ["cwe89"], [1]),
    ("org.owasp.esapi.Encoder.encodeForHTML(String)", ["cwe79"], [0]),
    ("org.owasp.esapi.Encoder.encodeForHTMLAttribute(String)", ["cwe79"], [0]),
    ("org.owasp.esapi.Encoder.encodeForJavaScript(String)", ["cwe79"], [0]),
    ("org.owasp.esapi.Encoder.encodeForCSS(String)", ["cwe79"], [0]),
    ("org.owasp.esapi.Encoder.encodeForURL(String)", ["cwe601"], [0]),
    ("org.owasp.esapi.Encoder.encodeForOS(Codec,String)", ["cwe78"], [1]),
    ("org.owasp.esapi.Encoder.encodeForXML(String)", ["cwe79"], [0]),
    ("org.owasp.esapi.Encoder.canonicalize(String)", ["cwe79"], [0]),
    ("org.owasp.esapi.Validator.getValidInput(String,String,String,int,boolean)", ["cwe79", "cwe89"], [1]),
    ("org.owasp.esapi.Validator.getValidRedirectLocation(String,String,boolean)", ["cwe601"], [1]),
    ("org.owasp.esapi.Validator.getValidSafeHTML(String,String,int,boolean)", ["cwe79"], [1]),
    ("org.owasp.encoder.Encode.forHtml(String)", ["cwe79"], [0]),
    ("org.owasp.encoder.Encode.forHtmlAttribute(String)", ["cwe79"], [0]),
    ("org.owasp.encoder.Encode.forHtmlContent(String)", ["cwe79"], [0]),
    ("org.owasp.encoder.Encode.forJavaScript(String)", ["cwe79"], [0]),
    ("org.owasp.encoder.Encode.forUriComponent(String)", ["cwe601"], [0]),
    ("org.owasp.encoder.Encode.forXml(String)", ["cwe79"], [0]),
    ("org.apache.commons.text.StringEscapeUtils.escapeHtml4(String)", ["cwe79"], [0]),
    ("org.apache.commons.text.StringEscapeUtils.escapeEcmaScript(String)", ["cwe79"], [0]),
    ("org.apache.commons.text.StringEscapeUtils.escapeXml11(String)", ["cwe79"], [0]),
    ("org.apache.commons.lang.StringEscapeUtils.escapeHtml(String)", ["cwe79"], [0]),
    ("org.apache.commons.lang.StringEscapeUtils.escapeSql(String)", ["cwe89"], [0]),
    ("org.apache.commons.lang.StringEscapeUtils.escapeJavaScript(String)", ["cwe79"], [0]),
    ("org.springframework.web.util.HtmlUtils.htmlEscape(String)", ["cwe79"], [0]),
    ("org.springframework.web.util.JavaScriptUtils.javaScriptEscape(String)", ["cwe79"], [0]),
    ("org.springframework.web.util.UriUtils.encode(String,String)", ["cwe601"], [0]),
    ("org.jsoup.Jsoup.clean(String,Safelist)", ["cwe79"], [0]),
    ("org.jsoup.Jsoup.clean(String,Whitelist)", ["cwe79"], [0]),
    ("org.owasp.html.PolicyFactory.sanitize(String)", ["cwe79"], [0]),
    ("java.net.URLEncoder.encode(String,String)", ["cwe601"], [0]),
    ("java.net.URLEncoder.encode(String)", ["cwe601"], [0]),
    ("com.google.common.html.HtmlEscapers.htmlEscaper()", ["cwe79"], []),
    ("com.google.common.escape.Escaper.escape(String)", ["cwe79"], [0]),
    ("java.util.regex.Pattern.quote(String)", ["cwe78"], [0]),
    ("org.apache.commons.io.FilenameUtils.getName(String)", ["cwe78"], [0]),
]:
    add(sig, ["sanitizer"] + labels, data_in=din, data_out="return")

add("java.lang.Integer.parseInt(String)", ["sanitizer"], data_in=[0], data_out="return",
    note="numeric parsing rejects injection payloads")
add("java.lang.Long.parseLong(String)", ["sanitizer"], data_in=[0], data_out="return")
add("java.util.UUID.fromString(String)", ["sanitizer"], data_in=[0], data_out="return")

# Authentication and authorisation checks.
for sig, labels in [
    ("javax.servlet.http.HttpServletRequest.login(String,String)", ["cwe306"]),
    ("javax.servlet.http.HttpServletRequest.authenticate(HttpServletResponse)", ["cwe306"]),
    ("javax.servlet.http.HttpServletRequest.logout()", ["cwe306"]),
    ("javax.servlet.http.HttpServletRequest.getUserPrincipal()", ["cwe306"]),
    ("javax.servlet.http.HttpServletRequest.isUserInRole(String)", ["cwe862", "cwe863"]),
    ("org.springframework.security.authentication.AuthenticationManager.authenticate(Authentication)", ["cwe306"]),
    ("org.springframework.security.authentication.AuthenticationProvider.authenticate(Authentication)", ["cwe306"]),
    ("org.springframework.security.core.context.SecurityContext.getAuthentication()", ["cwe306"]),
    ("org.springframework.security.core.Authentication.isAuthenticated()", ["cwe306"]),
    ("org.springframework.security.core.Authentication.getAuthorities()", ["cwe862"]),
    ("org.springframework.security.access.AccessDecisionManager.decide(Authentication,Object,Collection)", ["cwe862", "cwe863"]),
    ("org.springframework.security.access.PermissionEvaluator.hasPermission(Authentication,Object,Object)", ["cwe863"]),
    ("org.apache.shiro.subject.Subject.login(AuthenticationToken)", ["cwe306"]),
    ("org.apache.shiro.subject.Subject.isAuthenticated()", ["cwe306"]),
    ("org.apache.shiro.subject.Subject.hasRole(String)", ["cwe862"]),
    ("org.apache.shiro.subject.Subject.checkRole(String)", ["cwe862"]),
    ("org.apache.shiro.subject.Subject.isPermitted(String)", ["cwe863"]),
    ("org.apache.shiro.subject.Subject.checkPermission(String)", ["cwe863"]),
    ("java.security.AccessController.checkPermission(Permission)", ["cwe862"]),
    ("java.lang.SecurityManager.checkPermission(Permission)", ["cwe862"]),
    ("javax.security.auth.login.LoginContext.login()", ["cwe306"]),
    ("javax.security.auth.Subject.doAs(Subject,PrivilegedAction)", ["cwe863"]),
    ("javax.ejb.EJBContext.isCallerInRole(String)", ["cwe862", "cwe863"]),
    ("javax.ws.rs.core.SecurityContext.isUserInRole(String)", ["cwe862", "cwe863"]),
    ("android.content.Context.checkCallingPermission(String)", ["cwe862"]),
    ("android.content.Context.enforceCallingPermission(String,String)", ["cwe862"]),
]:
    add(sig, labels)

# Ordinary methods: the empty label set.
PLAIN = {
    "java.lang.String": ["length()", "trim()", "toLowerCase()", "toUpperCase()", "isEmpty()",
                         "charAt(int)", "substring(int)", "substring(int,int)", "indexOf(String)",
                         "equals(Object)", "hashCode()", "split(String)", "contains(CharSequence)",
                         "startsWith(String)", "endsWith(String)", "replace(char,char)", "toCharArray()",
                         "compareTo(String)", "valueOf(int)", "format(String,Object[])", "join(CharSequence,Iterable)"],
    "java.lang.StringBuilder": ["append(String)", "append(int)", "toString()", "length()",
                                "insert(int,String)", "reverse()", "setLength(int)", "<init>()"],
    "java.util.List": ["add(Object)", "get(int)", "size()", "isEmpty()", "remove(int)", "clear()",
                       "contains(Object)", "iterator()", "indexOf(Object)", "subList(int,int)"],
    "java.util.ArrayList": ["<init>()", "<init>(int)", "add(Object)", "get(int)", "size()", "ensureCapacity(int)"],
    "java.util.Map": ["put(Object,Object)", "get(Object)", "containsKey(Object)", "keySet()", "values()",
                      "entrySet()", "remove(Object)", "size()", "getOrDefault(Object,Object)"],
    "java.util.HashMap": ["<init>()", "put(Object,Object)", "get(Object)", "clear()"],
    "java.util.Set": ["add(Object)", "contains(Object)", "size()", "remove(Object)"],
    "java.util.Collections": ["sort(List)", "emptyList()", "unmodifiableList(List)", "reverse(List)",
                              "shuffle(List)", "singletonList(Object)"],
    "java.util.Arrays": ["asList(Object[])", "sort(int[])", "fill(int[],int)", "copyOf(int[],int)", "equals(int[],int[])"],
    "java.lang.Math": ["max(int,int)", "min(int,int)", "abs(int)", "sqrt(double)", "pow(double,double)",
                       "floor(double)", "ceil(double)", "round(double)", "random()"],
    "java.lang.Integer": ["valueOf(int)", "intValue()", "toString(int)", "compare(int,int)", "hashCode()"],
    "java.lang.Object": ["toString()", "equals(Object)", "hashCode()", "getClass()"],
    "java.util.Optional": ["of(Object)", "empty()", "isPresent()", "orElse(Object)", "map(Function)"],
    "java.util.stream.Stream": ["map(Function)", "filter(Predicate)", "collect(Collector)", "count()", "forEach(Consumer)"],
    "java.time.LocalDate": ["now()", "plusDays(long)", "getYear()", "isBefore(ChronoLocalDate)"],
    "java.util.Date": ["<init>()", "getTime()", "before(Date)", "after(Date)"],
    "java.io.File": ["exists()", "isDirectory()", "getName()", "length()", "mkdirs()", "delete()"],
    "java.lang.Thread": ["sleep(long)", "start()", "join()", "currentThread()", "interrupt()"],
    "java.util.concurrent.ExecutorService": ["shutdown()", "submit(Runnable)", "awaitTermination(long,TimeUnit)"],
    "java.util.concurrent.atomic.AtomicInteger": ["incrementAndGet()", "get()", "set(int)"],
    "java.text.SimpleDateFormat": ["<init>(String)", "format(Date)"],
    "java.math.BigDecimal": ["add(BigDecimal)", "multiply(BigDecimal)", "setScale(int,RoundingMode)", "compareTo(BigDecimal)"],
    "java.util.Iterator": ["hasNext()", "next()"],
    "java.lang.Character": ["isDigit(char)", "isLetter(char)", "toUpperCase(char)"],
    "java.lang.Boolean": ["parseBoolean(String)", "booleanValue()"],
    "java.util.Random": ["nextInt(int)", "nextDouble()"],
    "java.util.Objects": ["requireNonNull(Object)", "equals(Object,Object)", "hash(Object[])"],
}
for cls, methods in PLAIN.items():
    for m in methods:
        add(f"{cls}.{m}", [])

doc = {"version": "1", "methods": [records[k] for k in sorted(records)]}
OUT.parent.mkdir(parents=True, exist_ok=True)
OUT.write_text(json.dumps(doc, indent=2) + "\n")
print(f"{len(records)} records -> {OUT.relative_to(ROOT)}")
