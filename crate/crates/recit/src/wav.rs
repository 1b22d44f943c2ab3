//! RIFF/WAVE PCM encoding and decoding.

pub const SAMPLE_RATE: u32 = 22_050;

#[derive(Debug, Clone, PartialEq)]
pub struct Pcm {
    pub sample_rate: u32,
    pub channels: u16,
    /// Interleaved 16-bit samples.
    pub samples: Vec<i16>,
}

impl Pcm {
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels.max(1) as usize
    }

    pub fn duration_ms(&self) -> u64 {
        (self.frames() as f64 * 1000.0 / self.sample_rate as f64).round() as u64
    }

    /// Averages channels, then resamples linearly to `rate`.
    pub fn to_mono(&self, rate: u32) -> Pcm {
        let ch = self.channels.max(1) as usize;
        let mono: Vec<f64> =
            self.samples.chunks(ch).map(|f| f.iter().map(|&s| s as f64).sum::<f64>() / ch as f64).collect();
        let out_len = (mono.len() as f64 * rate as f64 / self.sample_rate as f64).round() as usize;
        let step = self.sample_rate as f64 / rate as f64;
        let samples = (0..out_len)
            .map(|i| {
                let x = i as f64 * step;
                let k = x.floor() as usize;
                let a = mono.get(k).copied().unwrap_or(0.0);
                let b = mono.get(k + 1).copied().unwrap_or(a);
                (a + (b - a) * (x - k as f64)).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
            })
            .collect();
        Pcm { sample_rate: rate, channels: 1, samples }
    }
}

pub fn encode(pcm: &Pcm) -> Vec<u8> {
    let data_len = (pcm.samples.len() * 2) as u32;
    let block = pcm.channels as u32 * 2;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&pcm.channels.to_le_bytes());
    out.extend_from_slice(&pcm.sample_rate.to_le_bytes());
    out.extend_from_slice(&(pcm.sample_rate * block).to_le_bytes());
    out.extend_from_slice(&(block as u16).to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in &pcm.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

fn u16_at(b: &[u8], i: usize) -> Option<u16> {
    Some(u16::from_le_bytes(b.get(i..i + 2)?.try_into().ok()?))
}

fn u32_at(b: &[u8], i: usize) -> Option<u32> {
    Some(u32::from_le_bytes(b.get(i..i + 4)?.try_into().ok()?))
}

/// Decodes 16-bit PCM WAV, skipping unknown chunks.
pub fn decode(b: &[u8]) -> Result<Pcm, String> {
    if b.get(0..4) != Some(b"RIFF") || b.get(8..12) != Some(b"WAVE") {
        return Err("not a RIFF/WAVE file".into());
    }
    let mut i = 12;
    let mut fmt = None;
    while i + 8 <= b.len() {
        let id = &b[i..i + 4];
        let len = u32_at(b, i + 4).unwrap() as usize;
        let body = i + 8;
        match id {
            b"fmt " => {
                let format = u16_at(b, body).ok_or("short fmt chunk")?;
                let channels = u16_at(b, body + 2).ok_or("short fmt chunk")?;
                let rate = u32_at(b, body + 4).ok_or("short fmt chunk")?;
                let bits = u16_at(b, body + 14).ok_or("short fmt chunk")?;
                if format != 1 || bits != 16 || channels == 0 {
                    return Err(format!("unsupported WAV encoding (format {format}, {bits} bits)"));
                }
                fmt = Some((channels, rate));
            }
            b"data" => {
                let (channels, sample_rate) = fmt.ok_or("data chunk before fmt chunk")?;
                // Streaming encoders may leave the length unset.
                let end = if len == 0 || len == u32::MAX as usize { b.len() } else { (body + len).min(b.len()) };
                let samples = b[body..end].chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
                return Ok(Pcm { sample_rate, channels, samples });
            }
            _ => {}
        }
        i = body + len + (len & 1);
    }
    Err("no data chunk".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_and_round_trip() {
        let pcm = Pcm { sample_rate: SAMPLE_RATE, channels: 1, samples: vec![0, 1, -1, i16::MAX, i16::MIN] };
        let bytes = encode(&pcm);
        assert_eq!(bytes.len(), 44 + 10);
        assert_eq!(u32_at(&bytes, 24), Some(22_050));
        assert_eq!(u16_at(&bytes, 34), Some(16));
        assert_eq!(decode(&bytes).unwrap(), pcm);
    }

    #[test]
    fn stereo_downmix_and_resample() {
        let pcm = Pcm { sample_rate: 44_100, channels: 2, samples: [100i16, 300].repeat(4410) };
        let m = pcm.to_mono(SAMPLE_RATE);
        assert_eq!((m.channels, m.samples.len()), (1, 2205));
        assert!(m.samples.iter().all(|&s| s == 200));
        assert_eq!(m.duration_ms(), 100);
    }
}
