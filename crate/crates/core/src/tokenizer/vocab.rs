/// A single vocabulary entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Anchor(u32),
    /// Relation id over the full (direct + inverse) relation space.
    Relation(u32),
    Pad,
    Disconnected,
}

/// Token id layout: anchors `[0, A)`, relations `[A, A + R)`, then `PAD` and
/// `DISCONNECTED`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocabulary {
    num_anchors: usize,
    num_relations: usize,
}

impl Vocabulary {
    pub fn new(num_anchors: usize, num_relations: usize) -> Self {
        Self {
            num_anchors,
            num_relations,
        }
    }

    pub fn num_anchors(&self) -> usize {
        self.num_anchors
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    /// Total number of token ids, special tokens included.
    pub fn size(&self) -> usize {
        self.num_anchors + self.num_relations + 2
    }

    #[inline]
    pub fn pad(&self) -> u32 {
        (self.num_anchors + self.num_relations) as u32
    }

    #[inline]
    pub fn disconnected(&self) -> u32 {
        self.pad() + 1
    }

    #[inline]
    pub fn anchor(&self, index: u32) -> u32 {
        debug_assert!((index as usize) < self.num_anchors);
        index
    }

    #[inline]
    pub fn relation(&self, relation: u32) -> u32 {
        debug_assert!((relation as usize) < self.num_relations);
        self.num_anchors as u32 + relation
    }

    pub fn id(&self, token: Token) -> u32 {
        match token {
            Token::Anchor(a) => self.anchor(a),
            Token::Relation(r) => self.relation(r),
            Token::Pad => self.pad(),
            Token::Disconnected => self.disconnected(),
        }
    }

    pub fn decode(&self, id: u32) -> Option<Token> {
        let a = self.num_anchors as u32;
        let r = self.num_relations as u32;
        match id {
            _ if id < a => Some(Token::Anchor(id)),
            _ if id < a + r => Some(Token::Relation(id - a)),
            _ if id == a + r => Some(Token::Pad),
            _ if id == a + r + 1 => Some(Token::Disconnected),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_contiguous_and_bijective() {
        let v = Vocabulary::new(3, 4);
        assert_eq!(v.size(), 9);
        for id in 0..v.size() as u32 {
            let t = v.decode(id).unwrap();
            assert_eq!(v.id(t), id);
        }
        assert_eq!(v.decode(9), None);
        assert_eq!(v.decode(3), Some(Token::Relation(0)));
        assert_eq!(v.decode(7), Some(Token::Pad));
        assert_eq!(v.decode(8), Some(Token::Disconnected));
    }
}
