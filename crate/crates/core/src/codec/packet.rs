use super::CodecError;

/// The content of one node: a byte string of the stripe's fragment size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Packet(Vec<u8>);

impl Packet {
    pub fn new(bytes: Vec<u8>) -> Self {
        Packet(bytes)
    }

    pub fn zeroed(len: usize) -> Self {
        Packet(vec![0; len])
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// In-place `self ^= other`.
    pub fn xor_assign(&mut self, other: &Packet) -> Result<(), CodecError> {
        if self.len() != other.len() {
            return Err(CodecError::LengthMismatch { expected: self.len(), found: other.len() });
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
        Ok(())
    }

    /// XOR of every packet in `packets`; all must share `len`.
    pub fn xor_all<'a, I>(len: usize, packets: I) -> Result<Packet, CodecError>
    where
        I: IntoIterator<Item = &'a Packet>,
    {
        let mut acc = Packet::zeroed(len);
        for p in packets {
            acc.xor_assign(p)?;
        }
        Ok(acc)
    }
}

impl From<Vec<u8>> for Packet {
    fn from(bytes: Vec<u8>) -> Self {
        Packet(bytes)
    }
}

impl From<&[u8]> for Packet {
    fn from(bytes: &[u8]) -> Self {
        Packet(bytes.to_vec())
    }
}

impl AsRef<[u8]> for Packet {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

pub fn xor_packets(a: &Packet, b: &Packet) -> Result<Packet, CodecError> {
    let mut out = a.clone();
    out.xor_assign(b)?;
    Ok(out)
}
