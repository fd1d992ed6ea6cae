mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::thread;

use flexgui_amf::AmfValue;
use flexgui_core::fault::FaultCode;
use flexgui_core::services::{Operation, SESSION_IDLE_MILLIS};
use flexgui_core::store::Stream;

use common::TestApp;

fn states() -> AmfValue {
    let state = |id: &str, x: i64, z: i64, visible: bool| {
        AmfValue::object([
            ("component_id", AmfValue::string(id)),
            ("x", x.into()),
            ("y", 20i64.into()),
            ("visible", visible.into()),
            ("z_order", z.into()),
            ("props", AmfValue::object([("title", AmfValue::string(id))])),
        ])
    };
    AmfValue::dense([
        state("clock", 10, 1, true),
        state("chat", 300, 2, false),
        state("search", 5000, 3, true),
    ])
}

fn settings() -> AmfValue {
    AmfValue::object([
        ("background_color", AmfValue::string("#102030")),
        ("font_family", AmfValue::string("serif")),
        ("font_size", 14i64.into()),
        ("theme", AmfValue::string("dark")),
    ])
}

/// Arguments after the token that would succeed with a live token.
fn valid_rest(op: Operation) -> Vec<AmfValue> {
    match op {
        Operation::SaveStates => vec![states()],
        Operation::SaveSettings => vec![settings()],
        Operation::GetLog => vec![10i64.into()],
        Operation::SendChat => vec!["hello".into()],
        Operation::PollChat => vec![0i64.into()],
        Operation::Search => vec!["phrase".into(), "gear".into()],
        _ => vec![],
    }
}

fn token(v: &AmfValue) -> String {
    v.get("token").and_then(AmfValue::as_str).unwrap().to_owned()
}

#[test]
fn session_shape() {
    let app = TestApp::start();
    let s = app.call("auth.register", vec!["alice".into(), "secret1".into()]).unwrap();
    let t = token(&s);
    assert_eq!(t.len(), 32);
    assert!(t.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()));
    assert_eq!(s.get("user_id"), Some(&AmfValue::Integer(1)));
    assert_eq!(s.get("login_seq"), Some(&AmfValue::Integer(0)));
    assert_eq!(s.get("username").and_then(AmfValue::as_str), Some("alice"));
    let a = app.login("alice", "secret1");
    let b = app.login("alice", "secret1");
    assert_ne!(a, b);
    assert_ne!(a, t);
    let dup = app.call("auth.register", vec!["alice".into(), "secret9".into()]).unwrap_err();
    assert_eq!(dup.code, FaultCode::DuplicateUser);
    let short = app.call("auth.register", vec!["a".into(), "x".into()]).unwrap_err();
    assert_eq!(short.code, FaultCode::BadArguments);
    let wrong = app.call("auth.login", vec!["alice".into(), "nope123".into()]).unwrap_err();
    let unknown = app.call("auth.login", vec!["zed".into(), "secret1".into()]).unwrap_err();
    assert_eq!(wrong.code, FaultCode::AuthInvalid);
    assert_eq!(wrong, unknown);
}

#[test]
fn every_route_requires_a_live_token() {
    let app = TestApp::start();
    let live = app.register("alice", "secret1");
    let logged_out = app.login("alice", "secret1");
    app.call("auth.logout", vec![logged_out.clone().into()]).unwrap();
    let expiring = app.login("alice", "secret1");
    let never_issued = "0123456789abcdef0123456789abcdef".to_owned();

    let gated: Vec<Operation> = app
        .gateway
        .registry()
        .routes()
        .map(|(_, r)| r.operation)
        .filter(|op| op.requires_token() && *op != Operation::Logout)
        .collect();
    assert_eq!(gated.len(), 8);

    let bad_tokens: Vec<(&str, AmfValue)> = vec![
        ("garbage", "garbage".into()),
        ("empty", "".into()),
        ("never issued", never_issued.into()),
        ("logged out", logged_out.into()),
        ("null", AmfValue::Null),
        ("integer", 42i64.into()),
    ];
    let log_before = app.store().stream_len(Stream::ActionLog);
    for op in &gated {
        for (label, tok) in &bad_tokens {
            let mut args = vec![tok.clone()];
            args.extend(valid_rest(*op));
            let f = app.call(op.target(), args).unwrap_err();
            assert_eq!(f.code, FaultCode::AuthRequired, "{} with {label} token", op.target());
        }
    }
    assert_eq!(app.store().stream_len(Stream::ActionLog), log_before, "failed auth was logged");

    // keep `live` fresh, let `expiring` go idle past the limit
    app.clock.advance(SESSION_IDLE_MILLIS / 2);
    app.call("gui.loadSettings", vec![live.clone().into()]).unwrap();
    app.clock.advance(SESSION_IDLE_MILLIS / 2 + 1);
    for op in &gated {
        let mut args = vec![expiring.clone().into()];
        args.extend(valid_rest(*op));
        assert_eq!(app.call(op.target(), args).unwrap_err().code, FaultCode::AuthRequired, "{}", op.target());
        let mut args = vec![live.clone().into()];
        args.extend(valid_rest(*op));
        app.call(op.target(), args).unwrap_or_else(|f| panic!("{} with live token: {f}", op.target()));
    }
}

#[test]
fn logout_is_idempotent_and_silent() {
    let app = TestApp::start();
    let t = app.register("alice", "secret1");
    assert_eq!(app.call("auth.logout", vec![t.clone().into()]).unwrap(), AmfValue::Boolean(true));
    assert_eq!(app.call("auth.logout", vec![t.clone().into()]).unwrap(), AmfValue::Boolean(true));
    assert_eq!(app.call("auth.logout", vec![AmfValue::Null]).unwrap(), AmfValue::Boolean(true));
    let f = app.call("gui.loadStates", vec![t.into()]).unwrap_err();
    assert_eq!(f.code, FaultCode::AuthRequired);
}

#[test]
fn layout_and_settings_survive_logout_and_login() {
    let app = TestApp::start();
    let t = app.register("alice", "secret1");
    let t = {
        app.call("auth.logout", vec![t.into()]).unwrap();
        app.login("alice", "secret1")
    };
    assert_eq!(app.call("gui.loadStates", vec![t.clone().into()]).unwrap(), AmfValue::dense([]));
    let defaults = app.call("gui.loadSettings", vec![t.clone().into()]).unwrap();
    assert_eq!(
        defaults,
        AmfValue::object([
            ("background_color", AmfValue::string("#FFFFFF")),
            ("font_family", AmfValue::string("sans-serif")),
            ("font_size", 12i64.into()),
            ("theme", AmfValue::string("light")),
        ])
    );
    app.call("gui.saveStates", vec![t.clone().into(), states()]).unwrap();
    app.call("gui.saveSettings", vec![t.clone().into(), settings()]).unwrap();
    app.call("auth.logout", vec![t.into()]).unwrap();
    let t = app.login("alice", "secret1");
    assert_eq!(app.call("gui.loadStates", vec![t.clone().into()]).unwrap(), states());
    assert_eq!(app.call("gui.loadSettings", vec![t.clone().into()]).unwrap(), settings());
    app.call("gui.saveStates", vec![t.clone().into(), AmfValue::dense([])]).unwrap();
    assert_eq!(app.call("gui.loadStates", vec![t.into()]).unwrap(), AmfValue::dense([]));
}

#[test]
fn invalid_layouts_and_settings_are_rejected() {
    let app = TestApp::start();
    let t = app.register("alice", "secret1");
    let dense = |items: Vec<AmfValue>| AmfValue::dense(items);
    let mut dup = states().as_dense().unwrap().to_vec();
    dup.push(dup[0].clone());
    let bad_color = AmfValue::object([
        ("background_color", AmfValue::string("#12XYZ0")),
        ("font_family", AmfValue::string("serif")),
        ("font_size", 14i64.into()),
        ("theme", AmfValue::string("dark")),
    ]);
    for (target, arg) in [
        ("gui.saveStates", dense(dup)),
        ("gui.saveStates", AmfValue::string("x")),
        ("gui.saveStates", dense(vec![AmfValue::Null])),
        ("gui.saveSettings", bad_color),
        ("gui.saveSettings", AmfValue::Null),
    ] {
        let f = app.call(target, vec![t.clone().into(), arg]).unwrap_err();
        assert_eq!(f.code, FaultCode::BadArguments, "{target}");
    }
}

#[test]
fn action_log_counts_successful_calls_only() {
    let app = TestApp::start();
    let t = app.register("alice", "secret1");
    let other = app.register("bobby", "secret2");
    app.call("chat.send", vec![other.clone().into(), "from bob".into()]).unwrap();
    let t2 = app.login("alice", "secret1");
    let calls: Vec<(&str, Vec<AmfValue>)> = vec![
        ("gui.saveStates", vec![t2.clone().into(), states()]),
        ("gui.loadStates", vec![t.clone().into()]),
        ("gui.saveSettings", vec![t.clone().into(), settings()]),
        ("gui.loadSettings", vec![t.clone().into()]),
        ("chat.send", vec![t.clone().into(), "hi".into()]),
        ("chat.poll", vec![t.clone().into(), 0i64.into()]),
        ("search.run", vec![t.clone().into(), "sql".into(), "SELECT id FROM records LIMIT 1".into()]),
    ];
    for (target, args) in &calls {
        app.call(target, args.clone()).unwrap();
    }
    // failures in between must not add entries
    app.call("chat.send", vec![t.clone().into(), "".into()]).unwrap_err();
    app.call("search.run", vec![t.clone().into(), "sql".into(), "DROP TABLE users".into()]).unwrap_err();
    app.call("auth.login", vec!["alice".into(), "wrong!!".into()]).unwrap_err();

    let log = app.call("log.get", vec![t.clone().into(), 500i64.into()]).unwrap();
    let entries = log.as_dense().unwrap();
    let actions: Vec<&str> = entries.iter().map(|e| e.get("action").unwrap().as_str().unwrap()).collect();
    let mut expected: Vec<&str> = calls.iter().rev().map(|(t, _)| *t).collect();
    expected.extend(["auth.login", "auth.register"]);
    assert_eq!(actions, expected);
    assert!(entries.iter().all(|e| e.get("user_id") == Some(&AmfValue::Integer(1))));
    let ts: Vec<&str> = entries.iter().map(|e| e.get("ts").unwrap().as_str().unwrap()).collect();
    assert!(ts.windows(2).all(|w| w[0] >= w[1]));
    assert!(ts[0].ends_with('Z') && ts[0].contains('T'));

    let newest = app.call("log.get", vec![t.clone().into(), 1i64.into()]).unwrap();
    assert_eq!(newest.as_dense().unwrap().len(), 1);
    assert_eq!(newest.as_dense().unwrap()[0].get("action").unwrap().as_str(), Some("log.get"));
    for limit in [0i64, 501] {
        let f = app.call("log.get", vec![t.clone().into(), limit.into()]).unwrap_err();
        assert_eq!(f.code, FaultCode::BadArguments);
    }
}

fn poll_all(app: &TestApp, token: &str, cursor: &mut i64) -> Vec<(i64, String)> {
    let mut out = Vec::new();
    loop {
        let batch = app.call("chat.poll", vec![token.into(), (*cursor).into()]).unwrap();
        let batch = batch.as_dense().unwrap().to_vec();
        if batch.is_empty() {
            return out;
        }
        for m in batch {
            let seq = m.get("seq").unwrap().as_i64().unwrap();
            assert!(seq > *cursor, "seq {seq} not after cursor {cursor}");
            *cursor = seq;
            out.push((seq, m.get("text").unwrap().as_str().unwrap().to_owned()));
        }
    }
}

#[test]
fn chat_delivery_after_login_exactly_once() {
    let app = Arc::new(TestApp::start());
    let a = app.register("alice", "secret1");
    let first = app.call("chat.send", vec![a.clone().into(), "early".into()]).unwrap();
    assert_eq!(first.get("seq"), Some(&AmfValue::Integer(1)));
    assert_eq!(first.get("sender").and_then(AmfValue::as_str), Some("alice"));
    let b = app.register("bobby", "secret2");

    let (mut ca, mut cb) = (0i64, 0i64);
    assert_eq!(poll_all(&app, &a, &mut ca).len(), 1);
    assert!(poll_all(&app, &b, &mut cb).is_empty());

    let senders: Vec<_> = (0..100)
        .map(|i| {
            let app = Arc::clone(&app);
            let tok = if i % 2 == 0 { a.clone() } else { b.clone() };
            thread::spawn(move || {
                let m = app.call("chat.send", vec![tok.into(), format!("msg {i}").into()]).unwrap();
                m.get("seq").unwrap().as_i64().unwrap()
            })
        })
        .collect();
    let mut seqs: Vec<i64> = senders.into_iter().map(|h| h.join().unwrap()).collect();
    seqs.sort_unstable();
    assert_eq!(seqs, (2..=101).collect::<Vec<_>>());

    let got_a = poll_all(&app, &a, &mut ca);
    let got_b = poll_all(&app, &b, &mut cb);
    let sent: BTreeSet<String> = (0..100).map(|i| format!("msg {i}")).collect();
    for got in [&got_a, &got_b] {
        assert_eq!(got.len(), 100);
        assert_eq!(got.iter().map(|(_, t)| t.clone()).collect::<BTreeSet<_>>(), sent);
        assert!(got.windows(2).all(|w| w[0].0 < w[1].0));
    }
    assert!(got_b.iter().all(|(_, t)| t != "early"));
    assert!(poll_all(&app, &b, &mut cb).is_empty());
    // rewinding the cursor never reaches before the login point
    let mut rewind = 0;
    assert!(poll_all(&app, &b, &mut rewind).iter().all(|(s, _)| *s > 1));
}

#[test]
fn chat_text_limits() {
    let app = TestApp::start();
    let a = app.register("alice", "secret1");
    for text in [String::new(), "x".repeat(1001)] {
        let f = app.call("chat.send", vec![a.clone().into(), text.into()]).unwrap_err();
        assert_eq!(f.code, FaultCode::BadArguments);
    }
    app.call("chat.send", vec![a.clone().into(), "x".repeat(1000).into()]).unwrap();
    let f = app.call("chat.poll", vec![a.into(), (-1i64).into()]).unwrap_err();
    assert_eq!(f.code, FaultCode::BadArguments);
}

#[test]
fn search_over_the_gateway() {
    let app = TestApp::start();
    let t = app.register("alice", "secret1");
    let f = app.call("search.run", vec!["bad".into(), "phrase".into(), "gear".into()]).unwrap_err();
    assert_eq!(f.code, FaultCode::AuthRequired);
    let r = app
        .call("search.run", vec![t.clone().into(), "sql".into(), "select name from records where id = 3".into()])
        .unwrap();
    assert_eq!(r.get("interpreted").and_then(AmfValue::as_str), Some("SELECT name FROM records WHERE id = 3"));
    assert_eq!(r.get("columns"), Some(&AmfValue::dense(["name".into()])));
    assert_eq!(r.get("total"), Some(&AmfValue::Integer(1)));
    assert_eq!(
        r.get("rows"),
        Some(&AmfValue::dense([AmfValue::dense(["Drive shaft D15x20".into()])]))
    );
    let f = app
        .call("search.run", vec![t.clone().into(), "sql".into(), "DROP TABLE users".into()])
        .unwrap_err();
    assert_eq!(f.code, FaultCode::QueryForbidden);
    let f = app
        .call("search.run", vec![t.clone().into(), "sql".into(), "SELECT * FROM users".into()])
        .unwrap_err();
    assert_eq!(f.code, FaultCode::QueryParse);
    assert_eq!(f.details.get("position"), Some(&AmfValue::Integer(15)));
    let f = app.call("search.run", vec![t.clone().into(), "xml".into(), "x".into()]).unwrap_err();
    assert_eq!(f.code, FaultCode::BadArguments);
    let r = app.call("search.run", vec![t.into(), "phrase".into(), "".into()]).unwrap();
    assert_eq!(r.get("total"), Some(&AmfValue::Integer(0)));
    assert_eq!(r.get("rows"), Some(&AmfValue::dense([])));
}
