//! Porter (1980) suffix-stripping stemmer, following the reference ANSI C
//! implementation's step structure.

struct Stemmer {
    buf: Vec<u8>,
    /// One past the last live byte; the stem is `buf[..end]`.
    end: usize,
    /// General-purpose split point set by `ends_with`.
    j: usize,
}

impl Stemmer {
    fn new(word: &str) -> Self {
        Stemmer {
            end: word.len(),
            buf: word.as_bytes().to_vec(),
            j: 0,
        }
    }

    fn is_consonant(&self, i: usize) -> bool {
        match self.buf[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.is_consonant(i - 1),
            _ => true,
        }
    }

    /// Measure m of `buf[..j]`: the number of vowel-consonant sequences.
    fn measure(&self) -> usize {
        let mut i = 0;
        let mut m = 0;
        loop {
            if i >= self.j {
                return m;
            }
            if !self.is_consonant(i) {
                break;
            }
            i += 1;
        }
        i += 1;
        loop {
            loop {
                if i >= self.j {
                    return m;
                }
                if self.is_consonant(i) {
                    break;
                }
                i += 1;
            }
            i += 1;
            m += 1;
            loop {
                if i >= self.j {
                    return m;
                }
                if !self.is_consonant(i) {
                    break;
                }
                i += 1;
            }
            i += 1;
        }
    }

    fn has_vowel(&self) -> bool {
        (0..self.j).any(|i| !self.is_consonant(i))
    }

    /// Double consonant ending at `i`.
    fn double_consonant(&self, i: usize) -> bool {
        i >= 1 && self.buf[i] == self.buf[i - 1] && self.is_consonant(i)
    }

    /// consonant-vowel-consonant ending at `i`, last consonant not w, x or y.
    fn cvc(&self, i: usize) -> bool {
        if i < 2 || !self.is_consonant(i) || self.is_consonant(i - 1) || !self.is_consonant(i - 2) {
            return false;
        }
        !matches!(self.buf[i], b'w' | b'x' | b'y')
    }

    fn ends_with(&mut self, suffix: &str) -> bool {
        let s = suffix.as_bytes();
        if s.len() > self.end {
            return false;
        }
        if &self.buf[self.end - s.len()..self.end] == s {
            self.j = self.end - s.len();
            true
        } else {
            false
        }
    }

    fn set_to(&mut self, s: &str) {
        self.buf.truncate(self.j);
        self.buf.extend_from_slice(s.as_bytes());
        self.end = self.j + s.len();
    }

    fn replace_if_measure(&mut self, s: &str) {
        if self.measure() > 0 {
            self.set_to(s);
        }
    }

    /// Step 1a/1b: plurals and -ed/-ing.
    fn step1ab(&mut self) {
        if self.buf[self.end - 1] == b's' {
            if self.ends_with("sses") {
                self.end -= 2;
            } else if self.ends_with("ies") {
                self.set_to("i");
            } else if self.end >= 2 && self.buf[self.end - 2] != b's' {
                self.end -= 1;
            }
        }
        if self.ends_with("eed") {
            if self.measure() > 0 {
                self.end -= 1;
            }
        } else if (self.ends_with("ed") || self.ends_with("ing")) && self.has_vowel() {
            self.end = self.j;
            if self.ends_with("at") {
                self.set_to("ate");
            } else if self.ends_with("bl") {
                self.set_to("ble");
            } else if self.ends_with("iz") {
                self.set_to("ize");
            } else if self.double_consonant(self.end - 1) {
                self.end -= 1;
                if matches!(self.buf[self.end - 1], b'l' | b's' | b'z') {
                    self.end += 1;
                }
            } else {
                self.j = self.end;
                if self.measure() == 1 && self.cvc(self.end - 1) {
                    self.set_to("e");
                }
            }
        }
    }

    /// Step 1c: terminal y -> i when the stem has a vowel.
    fn step1c(&mut self) {
        if self.ends_with("y") && self.has_vowel() {
            self.buf[self.end - 1] = b'i';
        }
    }

    /// Step 2: double suffixes to single ones (measure > 0 context).
    fn step2(&mut self) {
        if self.end < 2 {
            return;
        }
        match self.buf[self.end - 2] {
            b'a' => {
                if self.ends_with("ational") {
                    self.replace_if_measure("ate");
                } else if self.ends_with("tional") {
                    self.replace_if_measure("tion");
                }
            }
            b'c' => {
                if self.ends_with("enci") {
                    self.replace_if_measure("ence");
                } else if self.ends_with("anci") {
                    self.replace_if_measure("ance");
                }
            }
            b'e' => {
                if self.ends_with("izer") {
                    self.replace_if_measure("ize");
                }
            }
            b'l' => {
                if self.ends_with("bli") {
                    self.replace_if_measure("ble");
                } else if self.ends_with("alli") {
                    self.replace_if_measure("al");
                } else if self.ends_with("entli") {
                    self.replace_if_measure("ent");
                } else if self.ends_with("eli") {
                    self.replace_if_measure("e");
                } else if self.ends_with("ousli") {
                    self.replace_if_measure("ous");
                }
            }
            b'o' => {
                if self.ends_with("ization") {
                    self.replace_if_measure("ize");
                } else if self.ends_with("ation") {
                    self.replace_if_measure("ate");
                } else if self.ends_with("ator") {
                    self.replace_if_measure("ate");
                }
            }
            b's' => {
                if self.ends_with("alism") {
                    self.replace_if_measure("al");
                } else if self.ends_with("iveness") {
                    self.replace_if_measure("ive");
                } else if self.ends_with("fulness") {
                    self.replace_if_measure("ful");
                } else if self.ends_with("ousness") {
                    self.replace_if_measure("ous");
                }
            }
            b't' => {
                if self.ends_with("aliti") {
                    self.replace_if_measure("al");
                } else if self.ends_with("iviti") {
                    self.replace_if_measure("ive");
                } else if self.ends_with("biliti") {
                    self.replace_if_measure("ble");
                }
            }
            b'g' => {
                if self.ends_with("logi") {
                    self.replace_if_measure("log");
                }
            }
            _ => {}
        }
    }

    /// Step 3: -ic-, -full, -ness and similar.
    fn step3(&mut self) {
        match self.buf[self.end - 1] {
            b'e' => {
                if self.ends_with("icate") {
                    self.replace_if_measure("ic");
                } else if self.ends_with("ative") {
                    self.replace_if_measure("");
                } else if self.ends_with("alize") {
                    self.replace_if_measure("al");
                }
            }
            b'i' => {
                if self.ends_with("iciti") {
                    self.replace_if_measure("ic");
                }
            }
            b'l' => {
                if self.ends_with("ical") {
                    self.replace_if_measure("ic");
                } else if self.ends_with("ful") {
                    self.replace_if_measure("");
                }
            }
            b's' => {
                if self.ends_with("ness") {
                    self.replace_if_measure("");
                }
            }
            _ => {}
        }
    }

    /// Step 4: drop remaining suffixes when measure > 1.
    fn step4(&mut self) {
        if self.end < 2 {
            return;
        }
        let matched = match self.buf[self.end - 2] {
            b'a' => self.ends_with("al"),
            b'c' => self.ends_with("ance") || self.ends_with("ence"),
            b'e' => self.ends_with("er"),
            b'i' => self.ends_with("ic"),
            b'l' => self.ends_with("able") || self.ends_with("ible"),
            b'n' => {
                self.ends_with("ant")
                    || self.ends_with("ement")
                    || self.ends_with("ment")
                    || self.ends_with("ent")
            }
            b'o' => {
                (self.ends_with("ion")
                    && self.j >= 1
                    && matches!(self.buf[self.j - 1], b's' | b't'))
                    || self.ends_with("ou")
            }
            b's' => self.ends_with("ism"),
            b't' => self.ends_with("ate") || self.ends_with("iti"),
            b'u' => self.ends_with("ous"),
            b'v' => self.ends_with("ive"),
            b'z' => self.ends_with("ize"),
            _ => false,
        };
        if matched && self.measure() > 1 {
            self.end = self.j;
        }
    }

    /// Step 5: drop terminal e and reduce -ll under measure conditions.
    fn step5(&mut self) {
        self.j = self.end;
        if self.buf[self.end - 1] == b'e' {
            let m = self.measure();
            if m > 1 || (m == 1 && !self.cvc(self.end - 2)) {
                self.end -= 1;
            }
        }
        if self.buf[self.end - 1] == b'l' && self.double_consonant(self.end - 1) && self.measure() > 1
        {
            self.end -= 1;
        }
    }

    fn into_stem(mut self) -> String {
        self.buf.truncate(self.end);
        String::from_utf8(self.buf).expect("input was ASCII lowercase")
    }
}

/// Stems one lowercase alphabetic token. Words of length ≤ 2 are returned
/// unchanged, as in the reference implementation.
pub fn porter_stem(token: &str) -> String {
    debug_assert!(
        token.bytes().all(|b| b.is_ascii_lowercase()),
        "porter_stem expects [a-z]+ input, got {token:?}"
    );
    if token.len() <= 2 {
        return token.to_string();
    }
    let mut s = Stemmer::new(token);
    s.step1ab();
    s.step1c();
    s.step2();
    s.step3();
    s.step4();
    s.step5();
    s.into_stem()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plural_examples() {
        assert_eq!(porter_stem("caresses"), "caress");
        assert_eq!(porter_stem("ponies"), "poni");
        assert_eq!(porter_stem("ties"), "ti");
        assert_eq!(porter_stem("caress"), "caress");
        assert_eq!(porter_stem("cats"), "cat");
    }

    #[test]
    fn ed_ing_examples() {
        assert_eq!(porter_stem("feed"), "feed");
        assert_eq!(porter_stem("agreed"), "agre");
        assert_eq!(porter_stem("plastered"), "plaster");
        assert_eq!(porter_stem("bled"), "bled");
        assert_eq!(porter_stem("motoring"), "motor");
        assert_eq!(porter_stem("sing"), "sing");
        assert_eq!(porter_stem("hopping"), "hop");
        assert_eq!(porter_stem("falling"), "fall");
        assert_eq!(porter_stem("filing"), "file");
    }

    #[test]
    fn suffix_chains() {
        assert_eq!(porter_stem("relational"), "relat");
        assert_eq!(porter_stem("conditional"), "condit");
        assert_eq!(porter_stem("rational"), "ration");
        assert_eq!(porter_stem("generalizations"), "gener");
        assert_eq!(porter_stem("oscillators"), "oscil");
    }

    #[test]
    fn never_lengthens_stemmed_output_twice() {
        for w in ["dislocation", "reduction", "subluxation", "displaced"] {
            let once = porter_stem(w);
            let twice = porter_stem(&once);
            assert!(twice.len() <= once.len());
        }
    }

    #[test]
    fn short_words_unchanged() {
        assert_eq!(porter_stem("as"), "as");
        assert_eq!(porter_stem("is"), "is");
        assert_eq!(porter_stem("a"), "a");
    }
}
