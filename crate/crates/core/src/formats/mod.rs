//! Text and file formats: the `.gom` modelling language, `.session.json`
//! session documents and Graphviz DOT export.

pub mod dot;
pub mod dsl;
pub mod session_doc;

pub use dot::{export_dot, DotOptions};
pub use dsl::{format_model_text, parse_model_text, FormatError, ParseError, ParseErrorKind};
pub use session_doc::{read_session, session_from_json, session_to_json, write_session, LoadedSession, SessionDocError};
