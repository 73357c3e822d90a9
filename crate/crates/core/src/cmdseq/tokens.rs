//! Flat token stream form of a vectorized sequence.
//!
//! Vocabulary: 0..=255 are quantized value tokens; ids 256 and above are
//! type/control tokens. Each row is emitted as its type token followed by
//! slot tokens up to the last filled slot; trailing padding is truncated
//! (interior padding is kept as the placeholder token), and the stream ends
//! with the end-of-sequence token.

use super::quant::{CommandRow, RowKind, VectorizedSequence, SLOT_COUNT};
use super::CmdSeqError;

pub const TOK_L: u32 = 256;
pub const TOK_A: u32 = 257;
pub const TOK_R: u32 = 258;
pub const TOK_E: u32 = 259;
pub const SOS: u32 = 260;
pub const SOE: u32 = 261;
pub const EOS: u32 = 262;
pub const PAD: u32 = 263;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub tokens: Vec<u32>,
}

fn kind_token(kind: RowKind) -> u32 {
    match kind {
        RowKind::Line => TOK_L,
        RowKind::Arc => TOK_A,
        RowKind::Circle => TOK_R,
        RowKind::Extrude => TOK_E,
        RowKind::Sos => SOS,
        RowKind::Soe => SOE,
        RowKind::Eos => EOS,
    }
}

fn token_kind(token: u32) -> Option<RowKind> {
    Some(match token {
        TOK_L => RowKind::Line,
        TOK_A => RowKind::Arc,
        TOK_R => RowKind::Circle,
        TOK_E => RowKind::Extrude,
        SOS => RowKind::Sos,
        SOE => RowKind::Soe,
        EOS => RowKind::Eos,
        _ => return None,
    })
}

pub fn tokenize(vseq: &VectorizedSequence) -> TokenStream {
    let mut tokens = Vec::new();
    for row in &vseq.rows {
        tokens.push(kind_token(row.kind));
        let last_filled = row.slots.iter().rposition(Option::is_some);
        if let Some(last) = last_filled {
            for slot in &row.slots[..=last] {
                tokens.push(match slot {
                    Some(v) => *v as u32,
                    None => PAD,
                });
            }
        }
    }
    TokenStream { tokens }
}

pub fn detokenize(stream: &TokenStream) -> Result<VectorizedSequence, CmdSeqError> {
    let mut rows = Vec::new();
    let mut pos = 0;
    let tokens = &stream.tokens;
    let mut saw_eos = false;

    while pos < tokens.len() {
        let tok = tokens[pos];
        if saw_eos {
            return Err(CmdSeqError::IllegalTokenAtPosition { token: tok, position: pos });
        }
        let kind = token_kind(tok)
            .ok_or(CmdSeqError::IllegalTokenAtPosition { token: tok, position: pos })?;
        pos += 1;
        let mut row = CommandRow::empty(kind);
        if kind == RowKind::Eos {
            saw_eos = true;
            rows.push(row);
            continue;
        }
        let mut slot = 0;
        while pos < tokens.len() && token_kind(tokens[pos]).is_none() {
            let t = tokens[pos];
            if t != PAD && t > 255 {
                return Err(CmdSeqError::IllegalTokenAtPosition { token: t, position: pos });
            }
            if slot >= SLOT_COUNT {
                return Err(CmdSeqError::IllegalTokenAtPosition { token: t, position: pos });
            }
            row.slots[slot] = if t == PAD { None } else { Some(t as u8) };
            slot += 1;
            pos += 1;
        }
        rows.push(row);
    }

    if !saw_eos {
        return Err(CmdSeqError::TruncatedStream(
            "stream ended without the end-of-sequence token".into(),
        ));
    }
    Ok(VectorizedSequence { rows })
}

/// One sequence per line, one decimal id per whitespace-separated field.
pub fn write_token_line(stream: &TokenStream) -> String {
    stream
        .tokens
        .iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_token_line(line: &str) -> Result<TokenStream, CmdSeqError> {
    let tokens = line
        .split_whitespace()
        .map(|field| {
            field
                .parse::<u32>()
                .map_err(|_| CmdSeqError::MalformedJson(format!("bad token id {field:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TokenStream { tokens })
}
