//! Frame format and receiver-side frame recovery.
//!
//! A frame is a 32-bit sync word, a 16-bit sequence number, the payload,
//! and a 16-bit CRC over sequence number and payload. The sync word is a
//! fixed Barker-derived pattern (a Barker-13, its complement, and a
//! truncated Barker-7), giving a sharp self-correlation so the receiver can
//! locate frames by scanning a detected bit stream.

use alloc::vec::Vec;
use core::fmt;

pub const SYNC_WORD_BITS: usize = 32;
pub const SEQ_BITS: usize = 16;
pub const CRC_BITS: usize = 16;
pub const DEFAULT_PAYLOAD_BITS: usize = 1024;

/// Barker-13 ++ inverted Barker-13 ++ first six bits of Barker-7,
/// MSB transmitted first.
pub const SYNC_WORD: u32 = 0b1111_1001_1010_1000_0011_0010_1011_1001;

/// Total frame length for a given payload size.
pub fn frame_bits(payload_bits: usize) -> usize {
    SYNC_WORD_BITS + SEQ_BITS + payload_bits + CRC_BITS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameError {
    /// Fewer bits than a complete frame.
    Truncated,
    /// The leading 32 bits are not the sync word.
    SyncWordMismatch,
    /// CRC check over sequence number and payload failed.
    ChecksumMismatch,
}

impl fmt::Display for FrameError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameError::Truncated => write!(f, "truncated frame"),
            FrameError::SyncWordMismatch => write!(f, "sync word mismatch"),
            FrameError::ChecksumMismatch => write!(f, "checksum mismatch"),
        }
    }
}

impl core::error::Error for FrameError {}

/// CRC-16/CCITT (poly 0x1021, init 0xFFFF), bit-serial over the message
/// bits. Any single bit flip changes the checksum.
fn crc16(bits: impl Iterator<Item = bool>) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for bit in bits {
        let msb = (crc >> 15) & 1 == 1;
        crc <<= 1;
        if msb != bit {
            crc ^= 0x1021;
        }
    }
    crc
}

fn push_word(bits: &mut Vec<bool>, word: u32, width: usize) {
    for i in (0..width).rev() {
        bits.push((word >> i) & 1 == 1);
    }
}

fn read_word(bits: &[bool]) -> u32 {
    bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32)
}

/// Assemble sync word + sequence number + payload + CRC.
pub fn build_frame(payload: &[bool], seq_no: u16) -> Vec<bool> {
    let mut bits = Vec::with_capacity(frame_bits(payload.len()));
    push_word(&mut bits, SYNC_WORD, SYNC_WORD_BITS);
    push_word(&mut bits, u32::from(seq_no), SEQ_BITS);
    bits.extend_from_slice(payload);
    let crc = crc16(bits[SYNC_WORD_BITS..].iter().copied());
    push_word(&mut bits, u32::from(crc), CRC_BITS);
    bits
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedFrame {
    pub seq_no: u16,
    pub payload: Vec<bool>,
}

/// Parse one frame from the start of `bits`. Fails cleanly on truncation,
/// a wrong sync word, or a bad checksum.
pub fn parse_frame(bits: &[bool], payload_bits: usize) -> Result<ParsedFrame, FrameError> {
    let total = frame_bits(payload_bits);
    if bits.len() < total {
        return Err(FrameError::Truncated);
    }
    if read_word(&bits[..SYNC_WORD_BITS]) != SYNC_WORD {
        return Err(FrameError::SyncWordMismatch);
    }
    let body_end = SYNC_WORD_BITS + SEQ_BITS + payload_bits;
    let crc_calc = crc16(bits[SYNC_WORD_BITS..body_end].iter().copied());
    let crc_recv = read_word(&bits[body_end..total]) as u16;
    if crc_calc != crc_recv {
        return Err(FrameError::ChecksumMismatch);
    }
    Ok(ParsedFrame {
        seq_no: read_word(&bits[SYNC_WORD_BITS..SYNC_WORD_BITS + SEQ_BITS]) as u16,
        payload: bits[SYNC_WORD_BITS + SEQ_BITS..body_end].to_vec(),
    })
}

/// Outcome of scanning a detected bit stream for frames.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameScan {
    /// Sync-word matches: frames received, decodable or not.
    pub received: u64,
    /// Frames whose checksum verified.
    pub correct: u64,
    pub frames: Vec<ParsedFrame>,
}

/// Slide over a detected bit stream looking for sync words; every match
/// counts as a received frame, every verified checksum as a correct one.
/// After a verified frame the scan resumes past it, otherwise it advances
/// one bit.
pub fn scan_frames(bits: &[bool], payload_bits: usize) -> FrameScan {
    let total = frame_bits(payload_bits);
    let mut scan = FrameScan::default();
    let mut i = 0usize;
    while i + SYNC_WORD_BITS <= bits.len() {
        if read_word(&bits[i..i + SYNC_WORD_BITS]) == SYNC_WORD {
            scan.received += 1;
            match parse_frame(&bits[i..], payload_bits) {
                Ok(frame) => {
                    scan.correct += 1;
                    scan.frames.push(frame);
                    i += total;
                    continue;
                }
                Err(_) => {
                    i += 1;
                    continue;
                }
            }
        }
        i += 1;
    }
    scan
}
