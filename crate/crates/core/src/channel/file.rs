//! Little-endian binary channel files.
//!
//! Layout: 8 magic bytes `MMWCH1\0\0`, then `u32` values `U, K, M_ue, M_ap`,
//! then `U·K·M_ue·M_ap` complex entries as `(re, im)` pairs of `f64`,
//! user-major, then subcarrier, then row-major within each matrix.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::ChannelTensor;
use crate::error::{Error, Result};
use crate::scalar::{CMatrix, Real, C};

pub const CHANNEL_MAGIC: &[u8; 8] = b"MMWCH1\0\0";

const HEADER_LEN: u64 = 8 + 4 * 4;
const FIELD_NAMES: [&str; 4] = ["U", "K", "M_ue", "M_ap"];

fn format_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

pub fn write_channel<T: Real, W: Write>(tensor: &ChannelTensor<T>, mut out: W) -> Result<()> {
    if !tensor.is_full_band() {
        return Err(Error::Shape(
            "only full-band tensors can be written to a channel file".into(),
        ));
    }
    let dims = [tensor.num_users(), tensor.num_subcarriers(), tensor.m_ue(), tensor.m_ap()];
    out.write_all(CHANNEL_MAGIC)?;
    for (name, d) in FIELD_NAMES.iter().zip(dims) {
        let v = u32::try_from(d).map_err(|_| Error::Shape(format!("{name} = {d} exceeds u32")))?;
        out.write_all(&v.to_le_bytes())?;
    }
    for mats in tensor.users() {
        for h in mats {
            for r in 0..h.nrows() {
                for c in 0..h.ncols() {
                    let z = h[(r, c)];
                    out.write_all(&z.re.as_f64().to_le_bytes())?;
                    out.write_all(&z.im.as_f64().to_le_bytes())?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads until `buf` is full or the input ends; returns the bytes read.
fn read_fully<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match input.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(n)
}

pub fn read_channel<T: Real, R: Read>(mut input: R) -> Result<ChannelTensor<T>> {
    let mut header = [0u8; HEADER_LEN as usize];
    let got = read_fully(&mut input, &mut header)?;
    if got < 8 {
        return Err(format_err(got as u64, "truncated magic"));
    }
    if &header[..8] != CHANNEL_MAGIC {
        let bad = header[..8]
            .iter()
            .zip(CHANNEL_MAGIC)
            .position(|(a, b)| a != b)
            .unwrap_or(0);
        return Err(format_err(bad as u64, "bad magic bytes"));
    }
    if got < HEADER_LEN as usize {
        return Err(format_err(got as u64, "truncated header"));
    }
    let mut dims = [0usize; 4];
    for (i, d) in dims.iter_mut().enumerate() {
        let o = 8 + 4 * i;
        let v = u32::from_le_bytes(header[o..o + 4].try_into().expect("4 bytes"));
        if v == 0 {
            return Err(format_err(o as u64, format!("{} must be positive", FIELD_NAMES[i])));
        }
        *d = v as usize;
    }
    let [users, k, m_ue, m_ap] = dims;
    let entries = dims
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
        .and_then(|n| n.checked_mul(16).map(|b| (n, b)));
    let Some((_, payload)) = entries else {
        return Err(format_err(8, "dimensions overflow the payload size"));
    };
    if usize::try_from(payload).is_err() || HEADER_LEN.checked_add(payload).is_none() {
        return Err(format_err(8, "payload too large for this platform"));
    }

    let mut per_user = Vec::with_capacity(users);
    let mut offset = HEADER_LEN;
    let mut row = vec![0u8; m_ap * 16];
    for _ in 0..users {
        let mut mats = Vec::with_capacity(k);
        for _ in 0..k {
            let mut h = CMatrix::<T>::zeros(m_ue, m_ap);
            for r in 0..m_ue {
                let n = read_fully(&mut input, &mut row)?;
                if n < row.len() {
                    return Err(format_err(
                        offset + n as u64,
                        format!("truncated payload, expected {} bytes", HEADER_LEN + payload),
                    ));
                }
                for c in 0..m_ap {
                    let re = f64::from_le_bytes(row[16 * c..16 * c + 8].try_into().expect("8 bytes"));
                    let im = f64::from_le_bytes(row[16 * c + 8..16 * c + 16].try_into().expect("8 bytes"));
                    if !re.is_finite() || !im.is_finite() {
                        return Err(format_err(offset + 16 * c as u64, "non-finite channel entry"));
                    }
                    h[(r, c)] = C::new(T::lit(re), T::lit(im));
                }
                offset += row.len() as u64;
            }
            mats.push(h);
        }
        per_user.push(mats);
    }
    let mut extra = [0u8; 1];
    if read_fully(&mut input, &mut extra)? != 0 {
        return Err(format_err(offset, "trailing bytes after payload"));
    }
    ChannelTensor::new(k, (1..=k).collect(), per_user)
}

pub fn save_channel_file<T: Real>(tensor: &ChannelTensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let f = File::create(path)?;
    write_channel(tensor, BufWriter::new(f))
}

pub fn load_channel_file<T: Real>(path: impl AsRef<Path>) -> Result<ChannelTensor<T>> {
    let f = File::open(path)?;
    read_channel(BufReader::new(f))
}

impl<T: Real> ChannelTensor<T> {
    /// Checks a loaded tensor against expected dimensions. Mismatches are
    /// reported as format errors pointing at the offending header field.
    pub fn expect_dims(&self, users: Option<usize>, k: usize, m_ue: usize, m_ap: usize) -> Result<()> {
        let have = [self.num_users(), self.num_subcarriers(), self.m_ue(), self.m_ap()];
        let want = [users, Some(k), Some(m_ue), Some(m_ap)];
        for i in 0..4 {
            if let Some(w) = want[i] {
                if have[i] != w {
                    return Err(format_err(
                        8 + 4 * i as u64,
                        format!("{} = {} in file, configuration expects {w}", FIELD_NAMES[i], have[i]),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ChannelTensor<f64> {
        let per_user = (0..2)
            .map(|u| {
                (0..3)
                    .map(|k| CMatrix::from_fn(2, 3, |r, c| C::new((u * 100 + k * 10 + r) as f64 + 0.1, c as f64 - 0.7)))
                    .collect()
            })
            .collect();
        ChannelTensor::new(3, vec![1, 2, 3], per_user).unwrap()
    }

    fn bytes(t: &ChannelTensor<f64>) -> Vec<u8> {
        let mut buf = Vec::new();
        write_channel(t, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_and_size() {
        let t = sample();
        let buf = bytes(&t);
        assert_eq!(buf.len() as u64, HEADER_LEN + 2 * 3 * 2 * 3 * 16);
        let back: ChannelTensor<f64> = read_channel(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn row_major_entry_order() {
        let buf = bytes(&sample());
        let at = |i: usize| f64::from_le_bytes(buf[24 + 8 * i..32 + 8 * i].try_into().unwrap());
        // entry (0,1) of user 0, k 0 is the second complex value
        assert_eq!(at(2), 0.1);
        assert_eq!(at(3), 1.0 - 0.7);
    }

    #[test]
    fn malformed_inputs_report_offsets() {
        let buf = bytes(&sample());
        let offset = |data: &[u8]| match read_channel::<f64, _>(data) {
            Err(Error::Format { offset, .. }) => offset,
            other => panic!("expected format error, got {other:?}"),
        };
        let mut bad = buf.clone();
        bad[3] = b'X';
        assert_eq!(offset(&bad), 3);
        assert_eq!(offset(&buf[..20]), 20);
        assert_eq!(offset(&buf[..buf.len() - 5]), buf.len() as u64 - 5);
        let mut extra = buf.clone();
        extra.push(0);
        assert_eq!(offset(&extra), buf.len() as u64);
        let mut zero = buf.clone();
        zero[12..16].copy_from_slice(&0u32.to_le_bytes());
        assert_eq!(offset(&zero), 12);
        let mut huge = buf[..24].to_vec();
        for i in 0..4 {
            huge[8 + 4 * i..12 + 4 * i].copy_from_slice(&u32::MAX.to_le_bytes());
        }
        assert_eq!(offset(&huge), 8);
    }

    #[test]
    fn dimension_expectations() {
        let t = sample();
        assert!(t.expect_dims(Some(2), 3, 2, 3).is_ok());
        match t.expect_dims(None, 512, 2, 3) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 12),
            other => panic!("unexpected {other:?}"),
        }
    }
}
