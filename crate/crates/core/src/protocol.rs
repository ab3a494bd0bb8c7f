//! Line-oriented wire format shared by chat and game control traffic.
//!
//! Every unit on the wire is a single [`Frame`]: one line of UTF-8 text with
//! no embedded line terminators. Frames that start with the control prefix
//! `#!` carry an opcode and `|`-separated fields; everything else is user chat
//! of the form `sender>text`.
//!
//! Control field escapes:
//!
//! | raw          | escaped |
//! |--------------|---------|
//! | `\|`         | `\p`    |
//! | `\`          | `\\`    |
//! | line feed    | `\n`    |
//! | carriage ret | `\r`    |
//!
//! Chat text is carried verbatim. When the text (after any leading spaces)
//! starts with `#!`, the encoder inserts one extra leading space so the part
//! after `>` never opens with the control prefix; the decoder strips exactly
//! that space again.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const CONTROL_PREFIX: &str = "#!";
pub const FIELD_SEPARATOR: char = '|';
pub const CHAT_SEPARATOR: char = '>';

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("unknown opcode `{0}`")]
    InvalidOpcode(String),
    #[error("frame is empty")]
    EmptyFrame,
    #[error("frame contains a raw line terminator")]
    LineTerminator,
    #[error("chat sender is empty")]
    EmptySender,
    #[error("invalid chat sender `{0}`")]
    InvalidSender(String),
    #[error("malformed control frame: {0}")]
    MalformedControl(String),
    #[error("malformed chat frame: missing `>` separator")]
    MalformedChat,
}

macro_rules! opcodes {
    ($($variant:ident => $text:literal),+ $(,)?) => {
        /// The closed set of control opcodes.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Opcode {
            $($variant),+
        }

        impl Opcode {
            pub const ALL: &'static [Opcode] = &[$(Opcode::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Opcode::$variant => $text),+
                }
            }
        }

        impl FromStr for Opcode {
            type Err = ProtocolError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok(Opcode::$variant),)+
                    other => Err(ProtocolError::InvalidOpcode(other.to_string())),
                }
            }
        }
    };
}

opcodes! {
    Join => "JOIN",
    Leave => "LEAVE",
    Start => "START",
    TurnBegin => "TURN_BEGIN",
    StratCard => "STRAT_CARD",
    SeSubmit => "SE_SUBMIT",
    IdentSubmit => "IDENT_SUBMIT",
    Verify => "VERIFY",
    IdentResult => "IDENT_RESULT",
    DiscussBegin => "DISCUSS_BEGIN",
    DiscussEnd => "DISCUSS_END",
    Roll => "ROLL",
    Move => "MOVE",
    EventCard => "EVENT_CARD",
    ControlPass => "CONTROL_PASS",
    RoundBegin => "ROUND_BEGIN",
    RoundResult => "ROUND_RESULT",
    MatchResult => "MATCH_RESULT",
    TimerTick => "TIMER_TICK",
    GameOver => "GAME_OVER",
    Error => "ERROR",
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line on the wire. Never empty, never contains `\n` or `\r`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame(String);

impl Frame {
    pub fn new(line: impl Into<String>) -> Result<Self, ProtocolError> {
        let line = line.into();
        check_line(&line)?;
        Ok(Frame(line))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Frame {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

fn check_line(line: &str) -> Result<(), ProtocolError> {
    if line.is_empty() {
        return Err(ProtocolError::EmptyFrame);
    }
    if line.contains(['\n', '\r']) {
        return Err(ProtocolError::LineTerminator);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ControlMessage {
    pub opcode: Opcode,
    pub fields: Vec<String>,
}

impl ControlMessage {
    pub fn new<I, S>(opcode: Opcode, fields: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ControlMessage {
            opcode,
            fields: fields.into_iter().map(Into::into).collect(),
        }
    }

    /// Parses the opcode from text; fails with `InvalidOpcode` outside the closed set.
    pub fn from_parts<I, S>(opcode: &str, fields: I) -> Result<Self, ProtocolError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Ok(ControlMessage::new(opcode.parse()?, fields))
    }

    pub fn field(&self, index: usize) -> Option<&str> {
        self.fields.get(index).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChatMessage {
    pub sender: String,
    pub text: String,
}

impl ChatMessage {
    pub fn new(sender: impl Into<String>, text: impl Into<String>) -> Self {
        ChatMessage {
            sender: sender.into(),
            text: text.into(),
        }
    }
}

/// A decoded frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Message {
    Control(ControlMessage),
    Chat(ChatMessage),
}

impl From<ControlMessage> for Message {
    fn from(msg: ControlMessage) -> Self {
        Message::Control(msg)
    }
}

impl From<ChatMessage> for Message {
    fn from(msg: ChatMessage) -> Self {
        Message::Chat(msg)
    }
}

pub fn encode_control(msg: &ControlMessage) -> Frame {
    let mut line =
        String::with_capacity(2 + msg.opcode.as_str().len() + msg.fields.iter().map(|f| f.len() + 1).sum::<usize>());
    line.push_str(CONTROL_PREFIX);
    line.push_str(msg.opcode.as_str());
    for field in &msg.fields {
        line.push(FIELD_SEPARATOR);
        escape_into(field, &mut line);
    }
    Frame(line)
}

fn escape_into(field: &str, out: &mut String) {
    for c in field.chars() {
        match c {
            '|' => out.push_str("\\p"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
}

fn unescape(field: &str) -> Result<String, ProtocolError> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('p') => out.push('|'),
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(ProtocolError::MalformedControl(format!("invalid escape `\\{other}`"))),
            None => {
                return Err(ProtocolError::MalformedControl(
                    "dangling escape at end of field".into(),
                ))
            }
        }
    }
    Ok(out)
}

/// Checks that `sender` can appear before the chat separator and still decode.
pub fn validate_sender(sender: &str) -> Result<(), ProtocolError> {
    if sender.is_empty() {
        return Err(ProtocolError::EmptySender);
    }
    if sender.starts_with(CONTROL_PREFIX) || sender.contains([CHAT_SEPARATOR, '\n', '\r']) {
        return Err(ProtocolError::InvalidSender(sender.to_string()));
    }
    Ok(())
}

fn needs_guard_space(text: &str) -> bool {
    text.trim_start_matches(' ').starts_with(CONTROL_PREFIX)
}

pub fn encode_chat(msg: &ChatMessage) -> Result<Frame, ProtocolError> {
    validate_sender(&msg.sender)?;
    if msg.text.contains(['\n', '\r']) {
        return Err(ProtocolError::LineTerminator);
    }
    let mut line = String::with_capacity(msg.sender.len() + msg.text.len() + 2);
    line.push_str(&msg.sender);
    line.push(CHAT_SEPARATOR);
    if needs_guard_space(&msg.text) {
        line.push(' ');
    }
    line.push_str(&msg.text);
    Ok(Frame(line))
}

pub fn encode(msg: &Message) -> Result<Frame, ProtocolError> {
    match msg {
        Message::Control(c) => Ok(encode_control(c)),
        Message::Chat(c) => encode_chat(c),
    }
}

/// Decodes one line. Total over the output of the two encoders; any other
/// input yields a value or a [`ProtocolError`], never a panic.
pub fn decode_frame(line: &str) -> Result<Message, ProtocolError> {
    check_line(line)?;
    if let Some(body) = line.strip_prefix(CONTROL_PREFIX) {
        return decode_control(body).map(Message::Control);
    }
    let (sender, rest) = line.split_once(CHAT_SEPARATOR).ok_or(ProtocolError::MalformedChat)?;
    if sender.is_empty() {
        return Err(ProtocolError::EmptySender);
    }
    let text = match rest.strip_prefix(' ') {
        Some(stripped) if needs_guard_space(stripped) => stripped,
        _ => rest,
    };
    Ok(Message::Chat(ChatMessage::new(sender, text)))
}

fn decode_control(body: &str) -> Result<ControlMessage, ProtocolError> {
    let mut parts = body.split(FIELD_SEPARATOR);
    // `split` always yields at least one item.
    let opcode_text = parts.next().unwrap_or_default();
    let opcode: Opcode = opcode_text
        .parse()
        .map_err(|_| ProtocolError::MalformedControl(format!("unknown opcode `{opcode_text}`")))?;
    let fields = parts.map(unescape).collect::<Result<Vec<_>, _>>()?;
    Ok(ControlMessage { opcode, fields })
}
