//! The closed catalog of faults returned on the `/onStatus` path.

use std::fmt;

use flexgui_amf::AmfValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultCode {
    NoSuchTarget,
    BadArguments,
    AuthRequired,
    AuthInvalid,
    DuplicateUser,
    QueryParse,
    QueryForbidden,
    NotFound,
    Internal,
}

impl FaultCode {
    pub const ALL: [FaultCode; 9] = [
        FaultCode::NoSuchTarget,
        FaultCode::BadArguments,
        FaultCode::AuthRequired,
        FaultCode::AuthInvalid,
        FaultCode::DuplicateUser,
        FaultCode::QueryParse,
        FaultCode::QueryForbidden,
        FaultCode::NotFound,
        FaultCode::Internal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultCode::NoSuchTarget => "gateway.no_such_target",
            FaultCode::BadArguments => "gateway.bad_arguments",
            FaultCode::AuthRequired => "auth.required",
            FaultCode::AuthInvalid => "auth.invalid",
            FaultCode::DuplicateUser => "auth.duplicate_user",
            FaultCode::QueryParse => "query.parse_error",
            FaultCode::QueryForbidden => "query.forbidden",
            FaultCode::NotFound => "store.not_found",
            FaultCode::Internal => "internal.error",
        }
    }

    pub fn parse(code: &str) -> Option<FaultCode> {
        FaultCode::ALL.into_iter().find(|c| c.as_str() == code)
    }
}

impl fmt::Display for FaultCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fault {
    pub code: FaultCode,
    pub message: String,
    pub details: AmfValue,
}

impl Fault {
    pub fn new(code: FaultCode, message: impl Into<String>) -> Self {
        Fault {
            code,
            message: message.into(),
            details: AmfValue::Null,
        }
    }

    pub fn with_details(mut self, details: AmfValue) -> Self {
        self.details = details;
        self
    }

    pub fn bad_arguments(message: impl Into<String>) -> Self {
        Fault::new(FaultCode::BadArguments, message)
    }

    pub fn auth_required() -> Self {
        Fault::new(FaultCode::AuthRequired, "login first")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Fault::new(FaultCode::Internal, message)
    }

    pub fn to_value(&self) -> AmfValue {
        make_fault(self.code, &self.message, self.details.clone())
    }

    /// Reads a fault object back; `None` if the shape or code is wrong.
    pub fn from_value(value: &AmfValue) -> Option<Fault> {
        let code = FaultCode::parse(value.get("code")?.as_str()?)?;
        let message = value.get("message")?.as_str()?.to_owned();
        let details = value.get("details")?.clone();
        (value.as_object()?.len() == 3).then_some(Fault {
            code,
            message,
            details,
        })
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for Fault {}

/// `{code, message, details}`; absent details are `Null`.
pub fn make_fault(code: FaultCode, message: &str, details: AmfValue) -> AmfValue {
    AmfValue::object([
        ("code", AmfValue::string(code.as_str())),
        ("message", AmfValue::string(message)),
        ("details", details),
    ])
}
