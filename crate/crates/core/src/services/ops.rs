//! Operation ids and the conversion between positional AMF arguments and
//! the typed service calls.

use flexgui_amf::AmfValue;

use super::{ActionEntry, AppServices, ChatMessage, ComponentState, Session, UiSettings};
use crate::clock::iso8601;
use crate::fault::Fault;
use crate::search::{Cell, SearchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Echo,
    Register,
    Login,
    Logout,
    SaveStates,
    LoadStates,
    SaveSettings,
    LoadSettings,
    GetLog,
    SendChat,
    PollChat,
    Search,
}

impl Operation {
    pub const ALL: [Operation; 12] = [
        Operation::Echo,
        Operation::Register,
        Operation::Login,
        Operation::Logout,
        Operation::SaveStates,
        Operation::LoadStates,
        Operation::SaveSettings,
        Operation::LoadSettings,
        Operation::GetLog,
        Operation::SendChat,
        Operation::PollChat,
        Operation::Search,
    ];

    /// Name used in the routes file.
    pub fn name(self) -> &'static str {
        match self {
            Operation::Echo => "echo",
            Operation::Register => "register_user",
            Operation::Login => "login",
            Operation::Logout => "logout",
            Operation::SaveStates => "save_component_states",
            Operation::LoadStates => "load_component_states",
            Operation::SaveSettings => "save_ui_settings",
            Operation::LoadSettings => "load_ui_settings",
            Operation::GetLog => "get_action_log",
            Operation::SendChat => "send_chat",
            Operation::PollChat => "poll_chat",
            Operation::Search => "search",
        }
    }

    /// Default gateway target, also the `action` text in the log.
    pub fn target(self) -> &'static str {
        match self {
            Operation::Echo => "echo.echo",
            Operation::Register => "auth.register",
            Operation::Login => "auth.login",
            Operation::Logout => "auth.logout",
            Operation::SaveStates => "gui.saveStates",
            Operation::LoadStates => "gui.loadStates",
            Operation::SaveSettings => "gui.saveSettings",
            Operation::LoadSettings => "gui.loadSettings",
            Operation::GetLog => "log.get",
            Operation::SendChat => "chat.send",
            Operation::PollChat => "chat.poll",
            Operation::Search => "search.run",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Operation::Echo | Operation::Logout | Operation::LoadStates | Operation::LoadSettings => 1,
            Operation::Search => 3,
            _ => 2,
        }
    }

    /// Whether the first argument is a session token. Logout takes one but
    /// never faults on it; the rest answer auth.required for a bad token.
    pub fn requires_token(self) -> bool {
        !matches!(self, Operation::Echo | Operation::Register | Operation::Login)
    }

    pub fn from_name(name: &str) -> Option<Operation> {
        Operation::ALL.into_iter().find(|op| op.name() == name)
    }

    /// Runs the operation; `args` must already have the right length.
    pub fn invoke(self, svc: &AppServices, args: &[AmfValue]) -> Result<AmfValue, Fault> {
        debug_assert_eq!(args.len(), self.arity());
        let ack = |()| AmfValue::Boolean(true);
        match self {
            Operation::Echo => Ok(args[0].clone()),
            Operation::Register => svc
                .register_user(text_arg(args, 0, "username")?, text_arg(args, 1, "password")?)
                .map(session_value),
            Operation::Login => svc
                .login(text_arg(args, 0, "username")?, text_arg(args, 1, "password")?)
                .map(session_value),
            Operation::Logout => {
                // logout never faults, even for a missing token
                svc.logout(args[0].as_str().unwrap_or_default()).map(ack)
            }
            Operation::SaveStates => {
                let token = token_arg(args)?;
                svc.validate(token)?;
                let states = states_arg(&args[1])?;
                svc.save_component_states(token, &states).map(ack)
            }
            Operation::LoadStates => svc
                .load_component_states(token_arg(args)?)
                .map(|states| AmfValue::dense(states.iter().map(state_value))),
            Operation::SaveSettings => {
                let token = token_arg(args)?;
                svc.validate(token)?;
                let settings = settings_from_value(&args[1])?;
                svc.save_ui_settings(token, &settings).map(ack)
            }
            Operation::LoadSettings => svc.load_ui_settings(token_arg(args)?).map(|s| settings_value(&s)),
            Operation::GetLog => {
                let token = token_arg(args)?;
                svc.validate(token)?;
                let limit = int_arg(args, 1, "limit")?;
                svc.get_action_log(token, limit)
                    .map(|entries| AmfValue::dense(entries.iter().map(action_value)))
            }
            Operation::SendChat => {
                let token = token_arg(args)?;
                svc.validate(token)?;
                svc.send_chat(token, text_arg(args, 1, "text")?).map(|m| chat_value(&m))
            }
            Operation::PollChat => {
                let token = token_arg(args)?;
                svc.validate(token)?;
                let after = int_arg(args, 1, "after_seq")?;
                svc.poll_chat(token, after)
                    .map(|msgs| AmfValue::dense(msgs.iter().map(chat_value)))
            }
            Operation::Search => {
                let token = token_arg(args)?;
                svc.validate(token)?;
                svc.search(token, text_arg(args, 1, "mode")?, text_arg(args, 2, "query")?)
                    .map(|r| search_value(&r))
            }
        }
    }
}

// ---- arguments ----

fn token_arg(args: &[AmfValue]) -> Result<&str, Fault> {
    args[0].as_str().ok_or_else(Fault::auth_required)
}

fn text_arg<'a>(args: &'a [AmfValue], i: usize, what: &str) -> Result<&'a str, Fault> {
    args[i]
        .as_str()
        .ok_or_else(|| Fault::bad_arguments(format!("{what} must be a string")))
}

fn int_arg(args: &[AmfValue], i: usize, what: &str) -> Result<i64, Fault> {
    args[i]
        .as_i64()
        .ok_or_else(|| Fault::bad_arguments(format!("{what} must be an integer")))
}

/// Reads an object whose keys are exactly `required` plus any of `optional`.
fn fields<'a>(
    value: &'a AmfValue,
    what: &str,
    required: &[&str],
    optional: &[&str],
) -> Result<&'a [(String, AmfValue)], Fault> {
    let pairs = value
        .as_object()
        .ok_or_else(|| Fault::bad_arguments(format!("{what} must be an object")))?;
    for (k, _) in pairs {
        if !required.contains(&k.as_str()) && !optional.contains(&k.as_str()) {
            return Err(Fault::bad_arguments(format!("{what}: unexpected field {k}")));
        }
    }
    for k in required {
        if value.get(k).is_none() {
            return Err(Fault::bad_arguments(format!("{what}: missing field {k}")));
        }
    }
    Ok(pairs)
}

fn field_str(value: &AmfValue, what: &str, key: &str) -> Result<String, Fault> {
    value
        .get(key)
        .and_then(AmfValue::as_str)
        .map(str::to_owned)
        .ok_or_else(|| Fault::bad_arguments(format!("{what}: {key} must be a string")))
}

fn field_int(value: &AmfValue, what: &str, key: &str) -> Result<i64, Fault> {
    value
        .get(key)
        .and_then(AmfValue::as_i64)
        .ok_or_else(|| Fault::bad_arguments(format!("{what}: {key} must be an integer")))
}

pub(crate) fn state_from_value(value: &AmfValue) -> Result<ComponentState, Fault> {
    const WHAT: &str = "component state";
    fields(value, WHAT, &["component_id", "x", "y", "visible", "z_order"], &["props"])?;
    let visible = value
        .get("visible")
        .and_then(AmfValue::as_bool)
        .ok_or_else(|| Fault::bad_arguments(format!("{WHAT}: visible must be a boolean")))?;
    let props = match value.get("props") {
        None => Vec::new(),
        Some(p) => p
            .as_object()
            .ok_or_else(|| Fault::bad_arguments(format!("{WHAT}: props must be an object")))?
            .iter()
            .map(|(k, v)| {
                v.as_str()
                    .map(|s| (k.clone(), s.to_owned()))
                    .ok_or_else(|| Fault::bad_arguments(format!("{WHAT}: prop {k} must be a string")))
            })
            .collect::<Result<_, _>>()?,
    };
    Ok(ComponentState {
        component_id: field_str(value, WHAT, "component_id")?,
        x: field_int(value, WHAT, "x")?,
        y: field_int(value, WHAT, "y")?,
        visible,
        z_order: field_int(value, WHAT, "z_order")?,
        props,
    })
}

fn states_arg(value: &AmfValue) -> Result<Vec<ComponentState>, Fault> {
    let items = match value {
        AmfValue::Array(a) if a.assoc.is_empty() => &a.dense,
        _ => return Err(Fault::bad_arguments("states must be a dense array")),
    };
    items.iter().map(state_from_value).collect()
}

pub(crate) fn settings_from_value(value: &AmfValue) -> Result<UiSettings, Fault> {
    const WHAT: &str = "settings";
    fields(value, WHAT, &["background_color", "font_family", "font_size", "theme"], &[])?;
    Ok(UiSettings {
        background_color: field_str(value, WHAT, "background_color")?,
        font_family: field_str(value, WHAT, "font_family")?,
        font_size: field_int(value, WHAT, "font_size")?,
        theme: field_str(value, WHAT, "theme")?,
    })
}

// ---- results ----

pub(crate) fn session_value(s: Session) -> AmfValue {
    AmfValue::object([
        ("token", AmfValue::String(s.token)),
        ("user_id", AmfValue::from_i64(s.user_id)),
        ("username", AmfValue::String(s.username)),
        ("login_seq", AmfValue::from_i64(s.login_seq as i64)),
        ("last_active", AmfValue::Date(s.last_active as f64)),
    ])
}

pub(crate) fn state_value(s: &ComponentState) -> AmfValue {
    AmfValue::object([
        ("component_id", AmfValue::string(&s.component_id)),
        ("x", AmfValue::from_i64(s.x)),
        ("y", AmfValue::from_i64(s.y)),
        ("visible", AmfValue::Boolean(s.visible)),
        ("z_order", AmfValue::from_i64(s.z_order)),
        (
            "props",
            AmfValue::object(s.props.iter().map(|(k, v)| (k.clone(), AmfValue::string(v)))),
        ),
    ])
}

pub(crate) fn settings_value(s: &UiSettings) -> AmfValue {
    AmfValue::object([
        ("background_color", AmfValue::string(&s.background_color)),
        ("font_family", AmfValue::string(&s.font_family)),
        ("font_size", AmfValue::from_i64(s.font_size)),
        ("theme", AmfValue::string(&s.theme)),
    ])
}

fn action_value(e: &ActionEntry) -> AmfValue {
    AmfValue::object([
        ("ts", AmfValue::String(iso8601(e.ts))),
        ("user_id", AmfValue::from_i64(e.user_id)),
        ("action", AmfValue::string(&e.action)),
        ("detail", e.detail.clone().into()),
    ])
}

fn chat_value(m: &ChatMessage) -> AmfValue {
    AmfValue::object([
        ("seq", AmfValue::from_i64(m.seq as i64)),
        ("sender", AmfValue::string(&m.sender)),
        ("ts", AmfValue::String(iso8601(m.ts))),
        ("text", AmfValue::string(&m.text)),
    ])
}

fn cell_value(c: &Cell) -> AmfValue {
    match c {
        Cell::Int(n) => AmfValue::from_i64(*n),
        Cell::Float(x) => AmfValue::Double(*x),
        Cell::Text(s) => AmfValue::string(s),
    }
}

pub(crate) fn search_value(r: &SearchResult) -> AmfValue {
    AmfValue::object([
        (
            "columns",
            AmfValue::dense(r.columns.iter().map(AmfValue::string)),
        ),
        (
            "rows",
            AmfValue::dense(r.rows.iter().map(|row| AmfValue::dense(row.iter().map(cell_value)))),
        ),
        ("interpreted", AmfValue::string(&r.interpreted)),
        ("total", AmfValue::from_i64(r.total as i64)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_targets_are_unique() {
        let names: std::collections::HashSet<_> = Operation::ALL.iter().map(|o| o.name()).collect();
        let targets: std::collections::HashSet<_> = Operation::ALL.iter().map(|o| o.target()).collect();
        assert_eq!(names.len(), Operation::ALL.len());
        assert_eq!(targets.len(), Operation::ALL.len());
        for op in Operation::ALL {
            assert_eq!(Operation::from_name(op.name()), Some(op));
        }
    }

    #[test]
    fn state_conversion_roundtrips() {
        let s = ComponentState {
            component_id: "clock".into(),
            x: 10,
            y: 20,
            visible: true,
            z_order: -3,
            props: vec![("color".into(), "red".into()), ("a".into(), "b".into())],
        };
        assert_eq!(state_from_value(&state_value(&s)).unwrap(), s);
        let big = ComponentState { x: 1 << 40, ..s };
        assert_eq!(state_from_value(&state_value(&big)).unwrap(), big);
    }

    #[test]
    fn state_shape_errors() {
        let ok = state_value(&ComponentState {
            component_id: "c".into(),
            x: 0,
            y: 0,
            visible: false,
            z_order: 0,
            props: vec![],
        });
        let mut extra = ok.as_object().unwrap().to_vec();
        extra.push(("bogus".into(), AmfValue::Null));
        assert!(state_from_value(&AmfValue::Object(extra)).is_err());
        let missing: Vec<_> = ok.as_object().unwrap().iter().filter(|(k, _)| k != "x").cloned().collect();
        assert!(state_from_value(&AmfValue::Object(missing)).is_err());
        let no_props: Vec<_> = ok.as_object().unwrap().iter().filter(|(k, _)| k != "props").cloned().collect();
        assert!(state_from_value(&AmfValue::Object(no_props)).is_ok());
        assert!(state_from_value(&AmfValue::Null).is_err());
        assert!(states_arg(&AmfValue::string("x")).is_err());
    }

    #[test]
    fn settings_conversion_roundtrips() {
        let s = UiSettings::default();
        assert_eq!(settings_from_value(&settings_value(&s)).unwrap(), s);
    }
}
