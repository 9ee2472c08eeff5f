//! SCPI command grammar: tokenizer, mnemonic table, and canonical
//! formatting. Mnemonics match either their short or their full form,
//! case-insensitively; anything in between is rejected, as in the
//! standard.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("empty command line")]
    Empty,
    #[error("line exceeds {max} bytes", max = MAX_LINE_BYTES)]
    Oversize,
    #[error("undefined header `{header}` at byte {position}")]
    UndefinedHeader { header: String, position: usize },
    #[error("malformed number `{text}` at byte {position}")]
    BadNumber { text: String, position: usize },
    #[error("malformed argument `{text}` at byte {position}")]
    BadArgument { text: String, position: usize },
}

pub const MAX_LINE_BYTES: usize = 4096;

/// One mnemonic with its short and long spelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mnemonic {
    pub short: &'static str,
    pub long: &'static str,
}

impl Mnemonic {
    const fn new(short: &'static str, long: &'static str) -> Self {
        Self { short, long }
    }

    pub fn matches(&self, token: &str) -> bool {
        token.eq_ignore_ascii_case(self.short) || token.eq_ignore_ascii_case(self.long)
    }
}

/// Command identities understood by the emulated analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommandId {
    Idn,
    Rst,
    FreqCenter,
    FreqSpan,
    Rbw,
    Vbw,
    Detector,
    InitImmediate,
    TraceData,
    SystemPose,
}

pub struct CommandDef {
    pub id: CommandId,
    pub path: &'static [Mnemonic],
    /// Accepts the query form.
    pub queryable: bool,
    /// Accepts the setter/action form.
    pub settable: bool,
}

const FREQ: Mnemonic = Mnemonic::new("FREQ", "FREQuency");
const CENT: Mnemonic = Mnemonic::new("CENT", "CENTer");
const SPAN: Mnemonic = Mnemonic::new("SPAN", "SPAN");
const BAND: Mnemonic = Mnemonic::new("BAND", "BANDwidth");
const RES: Mnemonic = Mnemonic::new("RES", "RESolution");
const VID: Mnemonic = Mnemonic::new("VID", "VIDeo");
const DET: Mnemonic = Mnemonic::new("DET", "DETector");
const INIT: Mnemonic = Mnemonic::new("INIT", "INITiate");
const IMM: Mnemonic = Mnemonic::new("IMM", "IMMediate");
const TRAC: Mnemonic = Mnemonic::new("TRAC", "TRACe");
const DATA: Mnemonic = Mnemonic::new("DATA", "DATA");
const SYST: Mnemonic = Mnemonic::new("SYST", "SYSTem");
const POSE: Mnemonic = Mnemonic::new("POSE", "POSE");

/// The shipped grammar. `:BANDwidth` alone resolves to its default
/// `:RESolution` node, hence the duplicate id.
pub const GRAMMAR: &[CommandDef] = &[
    CommandDef {
        id: CommandId::FreqCenter,
        path: &[FREQ, CENT],
        queryable: true,
        settable: true,
    },
    CommandDef {
        id: CommandId::FreqSpan,
        path: &[FREQ, SPAN],
        queryable: true,
        settable: true,
    },
    CommandDef {
        id: CommandId::Rbw,
        path: &[BAND],
        queryable: true,
        settable: true,
    },
    CommandDef {
        id: CommandId::Rbw,
        path: &[BAND, RES],
        queryable: true,
        settable: true,
    },
    CommandDef {
        id: CommandId::Vbw,
        path: &[BAND, VID],
        queryable: true,
        settable: true,
    },
    CommandDef {
        id: CommandId::Detector,
        path: &[DET],
        queryable: true,
        settable: true,
    },
    CommandDef {
        id: CommandId::InitImmediate,
        path: &[INIT, IMM],
        queryable: false,
        settable: true,
    },
    CommandDef {
        id: CommandId::TraceData,
        path: &[TRAC, DATA],
        queryable: true,
        settable: false,
    },
    CommandDef {
        id: CommandId::SystemPose,
        path: &[SYST, POSE],
        queryable: true,
        settable: true,
    },
];

/// Detector argument mnemonics.
pub const DET_NORMAL: Mnemonic = Mnemonic::new("NORM", "NORMal");
pub const DET_MAXHOLD: Mnemonic = Mnemonic::new("MAXH", "MAXHold");
/// Trace selector accepted by `:TRACe:DATA?`.
pub const TRACE1: Mnemonic = Mnemonic::new("TRACE1", "TRACE1");

#[derive(Debug, Clone, PartialEq)]
pub enum ScpiArg {
    Number(f64),
    Mnemonic(String),
    Str(String),
}

/// A parsed command: resolved identity, query flag, and raw arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct ScpiCommand {
    pub id: CommandId,
    pub is_query: bool,
    pub args: Vec<ScpiArg>,
}

fn looks_numeric(token: &str) -> bool {
    token
        .chars()
        .next()
        .map(|c| c.is_ascii_digit() || c == '+' || c == '-' || c == '.')
        .unwrap_or(false)
}

fn parse_args(rest: &str, offset: usize) -> Result<Vec<ScpiArg>, ParseError> {
    let rest = rest.trim();
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    let mut args = Vec::new();
    for raw in rest.split(',') {
        let token = raw.trim();
        if token.is_empty() {
            return Err(ParseError::BadArgument {
                text: raw.to_string(),
                position: offset,
            });
        }
        if token.starts_with('"') || token.starts_with('\'') {
            let inner = token.trim_matches(|c| c == '"' || c == '\'');
            args.push(ScpiArg::Str(inner.to_string()));
        } else if looks_numeric(token) {
            let value: f64 = token.parse().map_err(|_| ParseError::BadNumber {
                text: token.to_string(),
                position: offset,
            })?;
            if !value.is_finite() {
                return Err(ParseError::BadNumber {
                    text: token.to_string(),
                    position: offset,
                });
            }
            args.push(ScpiArg::Number(value));
        } else if token.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            args.push(ScpiArg::Mnemonic(token.to_ascii_uppercase()));
        } else {
            return Err(ParseError::BadArgument {
                text: token.to_string(),
                position: offset,
            });
        }
    }
    Ok(args)
}

/// Parses one newline-stripped command line.
pub fn parse_scpi(line: &str) -> Result<ScpiCommand, ParseError> {
    if line.len() > MAX_LINE_BYTES {
        return Err(ParseError::Oversize);
    }
    let line = line.trim();
    if line.is_empty() {
        return Err(ParseError::Empty);
    }

    // IEEE-488.2 common commands.
    if let Some(rest) = line.strip_prefix('*') {
        let (word, args_text) = match rest.find(char::is_whitespace) {
            Some(i) => rest.split_at(i),
            None => (rest, ""),
        };
        let (name, is_query) = match word.strip_suffix('?') {
            Some(n) => (n, true),
            None => (word, false),
        };
        let id = if name.eq_ignore_ascii_case("IDN") && is_query {
            CommandId::Idn
        } else if name.eq_ignore_ascii_case("RST") && !is_query {
            CommandId::Rst
        } else {
            return Err(ParseError::UndefinedHeader {
                header: format!("*{word}"),
                position: 0,
            });
        };
        return Ok(ScpiCommand {
            id,
            is_query,
            args: parse_args(args_text, line.len() - args_text.len())?,
        });
    }

    let (header_text, args_text) = match line.find(char::is_whitespace) {
        Some(i) => line.split_at(i),
        None => (line, ""),
    };
    let (header_text, is_query) = match header_text.strip_suffix('?') {
        Some(h) => (h, true),
        None => (header_text, false),
    };
    let tokens: Vec<&str> = header_text
        .trim_start_matches(':')
        .split(':')
        .collect();

    let def = GRAMMAR
        .iter()
        .find(|def| {
            def.path.len() == tokens.len()
                && def
                    .path
                    .iter()
                    .zip(&tokens)
                    .all(|(m, t)| m.matches(t))
        })
        .ok_or_else(|| ParseError::UndefinedHeader {
            header: header_text.to_string(),
            position: 0,
        })?;

    Ok(ScpiCommand {
        id: def.id,
        is_query,
        args: parse_args(args_text, line.len() - args_text.len())?,
    })
}

/// Canonical text for a parsed command: short-form header plus arguments.
/// Reparsing the result yields the identical command value.
pub fn format_scpi(cmd: &ScpiCommand) -> String {
    let mut out = String::new();
    match cmd.id {
        CommandId::Idn => out.push_str("*IDN"),
        CommandId::Rst => out.push_str("*RST"),
        _ => {
            // Print the longest path registered for the id (the explicit
            // node, not the default-subnode shorthand).
            let def = GRAMMAR
                .iter()
                .filter(|d| d.id == cmd.id)
                .max_by_key(|d| d.path.len())
                .expect("every id is in the grammar");
            for m in def.path {
                out.push(':');
                out.push_str(m.short);
            }
        }
    }
    if cmd.is_query {
        out.push('?');
    }
    for (i, arg) in cmd.args.iter().enumerate() {
        out.push(if i == 0 { ' ' } else { ',' });
        match arg {
            ScpiArg::Number(v) => out.push_str(&format_nrf(*v)),
            ScpiArg::Mnemonic(m) => out.push_str(m),
            ScpiArg::Str(s) => {
                out.push('"');
                out.push_str(s);
                out.push('"');
            }
        }
    }
    out
}

/// Shortest round-trip decimal form for a number on the wire.
pub fn format_nrf(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_identity_query() {
        let cmd = parse_scpi("*IDN?").unwrap();
        assert_eq!(cmd.id, CommandId::Idn);
        assert!(cmd.is_query);
        assert!(cmd.args.is_empty());
    }

    #[test]
    fn short_and_long_forms_are_identical() {
        let a = parse_scpi(":FREQ:CENT 60e9").unwrap();
        let b = parse_scpi(":FREQuency:CENTer 60E9").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.args, vec![ScpiArg::Number(6.0e10)]);
    }

    #[test]
    fn short_long_equivalence_for_every_grammar_entry() {
        for def in GRAMMAR {
            if !def.settable {
                continue;
            }
            let short: String = def
                .path
                .iter()
                .map(|m| format!(":{}", m.short))
                .collect();
            let long: String = def.path.iter().map(|m| format!(":{}", m.long)).collect();
            let a = parse_scpi(&short).unwrap();
            let b = parse_scpi(&long).unwrap();
            let c = parse_scpi(&short.to_lowercase()).unwrap();
            assert_eq!(a, b, "{short} vs {long}");
            assert_eq!(a, c);
            assert_eq!(a.id, def.id);
        }
    }

    #[test]
    fn partial_form_is_rejected() {
        // Between short and long is not a valid spelling.
        assert!(matches!(
            parse_scpi(":FREQUE:CENT 1"),
            Err(ParseError::UndefinedHeader { .. })
        ));
    }

    #[test]
    fn default_subnode_resolves() {
        let a = parse_scpi(":BAND 1e6").unwrap();
        let b = parse_scpi(":BANDwidth:RESolution 1e6").unwrap();
        assert_eq!(a.id, CommandId::Rbw);
        assert_eq!(a.id, b.id);
    }

    #[test]
    fn trace_query_with_mnemonic_argument() {
        let cmd = parse_scpi(":TRAC:DATA? TRACE1").unwrap();
        assert_eq!(cmd.id, CommandId::TraceData);
        assert!(cmd.is_query);
        assert_eq!(cmd.args, vec![ScpiArg::Mnemonic("TRACE1".into())]);
    }

    #[test]
    fn rejects_malformed_numbers_and_oversize() {
        assert!(matches!(
            parse_scpi(":FREQ:CENT 60ee9"),
            Err(ParseError::BadNumber { .. })
        ));
        let long_line = format!(":FREQ:CENT {}", "9".repeat(MAX_LINE_BYTES));
        assert_eq!(parse_scpi(&long_line), Err(ParseError::Oversize));
    }

    #[test]
    fn format_parse_round_trip() {
        for line in [
            "*IDN?",
            "*RST",
            ":FREQuency:CENTer 60e9",
            ":FREQ:SPAN 0",
            ":BANDwidth 1e6",
            ":BAND:VID 3e6",
            ":DETector MAXHold",
            ":INITiate:IMMediate",
            ":TRACe:DATA? TRACE1",
            ":SYSTem:POSE 45,30,0.05",
        ] {
            let cmd = parse_scpi(line).unwrap();
            let printed = format_scpi(&cmd);
            let reparsed = parse_scpi(&printed).unwrap();
            assert_eq!(cmd, reparsed, "line {line} printed {printed}");
        }
    }
}
