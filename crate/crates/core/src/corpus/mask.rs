use super::types::{slice_chars, CharSpan, MarkedSentence};

/// Surface form that replaces a masked event.
pub const MASK_TOKEN: &str = "blank";

/// True when both event surfaces are exactly the mask token.
pub fn is_masked(s: &MarkedSentence) -> bool {
    s.e1_text() == MASK_TOKEN && s.e2_text() == MASK_TOKEN
}

/// Replaces each event surface with [`MASK_TOKEN`] and moves the spans onto it.
pub fn mask_events(s: &MarkedSentence) -> MarkedSentence {
    let mask_len = MASK_TOKEN.chars().count();
    let first_is_e1 = s.e1.start <= s.e2.start;
    let (first, second) = if first_is_e1 { (s.e1, s.e2) } else { (s.e2, s.e1) };
    let n = s.char_len();

    let mut text = String::with_capacity(s.text.len());
    text.push_str(slice_chars(&s.text, CharSpan::new(0, first.start)));
    let new_first = CharSpan::new(first.start, first.start + mask_len);
    text.push_str(MASK_TOKEN);
    text.push_str(slice_chars(&s.text, CharSpan::new(first.end, second.start)));
    let second_start = new_first.end + (second.start - first.end);
    let new_second = CharSpan::new(second_start, second_start + mask_len);
    text.push_str(MASK_TOKEN);
    text.push_str(slice_chars(&s.text, CharSpan::new(second.end, n)));

    let (e1, e2) = if first_is_e1 {
        (new_first, new_second)
    } else {
        (new_second, new_first)
    };
    MarkedSentence {
        text,
        e1,
        e2,
        ..s.clone()
    }
}
