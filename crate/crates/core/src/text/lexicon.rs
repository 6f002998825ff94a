//! Built-in closed-class word lists for [`super::LexiconTagger`].

use super::PosClass;

const ARTICLES: &[&str] = &["a", "an", "the"];

const PRONOUNS: &[&str] = &[
    "anybody", "anyone", "anything", "everybody", "everyone", "everything", "he", "her", "hers",
    "herself", "him", "himself", "his", "i", "it", "its", "itself", "me", "mine", "my", "myself",
    "nobody", "nothing", "one", "our", "ours", "ourselves", "she", "somebody", "someone",
    "something", "their", "theirs", "them", "themselves", "they", "us", "we", "who", "whom",
    "whose", "you", "your", "yours", "yourself", "yourselves",
];

const VERBS: &[&str] = &[
    // auxiliaries, copulas and modals
    "am", "are", "be", "been", "being", "can", "could", "did", "do", "does", "done", "had", "has",
    "have", "having", "is", "may", "might", "must", "shall", "should", "was", "were", "will",
    "would",
    // frequent irregular forms
    "ate", "became", "become", "becomes", "began", "begin", "begins", "begun", "bought", "bring",
    "brings", "brought", "build", "builds", "built", "came", "come", "comes", "drank", "drew",
    "drove", "eat", "eats", "fell", "felt", "find", "finds", "flew", "forgot", "found", "gave",
    "get", "gets", "give", "gives", "given", "go", "goes", "gone", "got", "grew", "held", "hold",
    "holds", "keep", "keeps", "kept", "knew", "know", "knows", "known", "led", "left", "let",
    "lets", "lost", "made", "make", "makes", "meet", "meets", "met", "paid", "ran", "said",
    "sang", "sat", "saw", "say", "says", "see", "seen", "sees", "sent", "show", "shows", "shown",
    "sold", "spoke", "stood", "take", "takes", "taken", "taught", "tell", "tells", "think",
    "thinks", "thought", "told", "took", "understood", "went", "won", "wore", "write", "writes",
    "written", "wrote",
    // frequent regular base forms that are otherwise read as nouns
    "add", "adds", "apply", "applies", "allow", "allows", "ask", "asks", "clean", "cleans",
    "coat", "coats", "contain", "contains", "create", "creates", "dry", "dries", "ensure",
    "evaluate", "evaluates", "help", "helps", "include", "includes", "involve", "involves",
    "need", "needs", "paint", "prime", "primes", "provide", "provides", "remove", "removes",
    "seem", "seems", "use", "uses", "want", "wants", "wipe", "wipes", "work", "works",
];

const FUNCTION_WORDS: &[&str] = &[
    // prepositions and particles
    "about", "above", "across", "after", "against", "along", "among", "around", "as", "at",
    "before", "behind", "below", "beneath", "beside", "between", "beyond", "by", "despite",
    "down", "during", "except", "for", "from", "in", "inside", "into", "like", "near", "of",
    "off", "on", "onto", "out", "outside", "over", "per", "since", "through", "throughout",
    "till", "to", "toward", "towards", "under", "until", "up", "upon", "via", "with", "within",
    "without",
    // conjunctions and subordinators
    "although", "and", "because", "but", "either", "if", "neither", "nor", "or", "so", "than",
    "that", "though", "unless", "whereas", "whether", "while", "yet",
    // determiners and quantifiers other than articles
    "all", "another", "any", "both", "each", "every", "few", "many", "more", "most", "much",
    "no", "other", "several", "some", "such", "these", "this", "those",
    // wh-words other than pronouns
    "how", "what", "when", "where", "which", "why",
    // adverbs and negation
    "again", "almost", "already", "also", "always", "even", "ever", "first", "here", "instead",
    "just", "never", "not", "now", "often", "once", "only", "perhaps", "quite", "rather",
    "really", "still", "then", "there", "too", "very", "well",
    // common adjectives
    "bad", "best", "better", "big", "different", "early", "easy", "good", "great", "high",
    "important", "large", "late", "little", "long", "low", "new", "old", "same", "small",
    "smooth", "short", "true", "young",
    // interjections
    "hello", "hi", "oh", "please", "yes",
];

const ING_NOUNS: &[&str] = &[
    "building", "ceiling", "evening", "king", "morning", "ring", "spring", "string", "thing",
    "wing",
];

const ADJECTIVE_SUFFIXES: &[&str] = &["ous", "ful", "ive", "able", "ible", "less", "ish", "ical"];

fn contains(list: &[&str], word: &str) -> bool {
    list.contains(&word)
}

/// Classifies a lowercased token.
pub(crate) fn classify_builtin(word: &str) -> PosClass {
    if word.chars().any(|c| c.is_ascii_digit()) {
        return PosClass::Other;
    }
    if let Some((base, clitic)) = word.split_once(['\'', '\u{2019}']) {
        // possessive on a name or noun reads as a noun; every other clitic
        // hides a verb or negation
        if clitic == "s" && !contains(PRONOUNS, base) && !base.is_empty() {
            return PosClass::Noun;
        }
        return PosClass::Other;
    }
    if contains(ARTICLES, word) {
        return PosClass::Article;
    }
    if contains(PRONOUNS, word) {
        return PosClass::Pronoun;
    }
    if contains(VERBS, word) {
        return PosClass::Verb;
    }
    if contains(FUNCTION_WORDS, word) {
        return PosClass::Other;
    }
    let len = word.chars().count();
    if word.ends_with("ly") && len > 3 {
        return PosClass::Other;
    }
    if word.ends_with("ing") && len > 4 && !contains(ING_NOUNS, word) {
        return PosClass::Verb;
    }
    if word.ends_with("ed") && len > 3 {
        return PosClass::Verb;
    }
    if len > 4 && ADJECTIVE_SUFFIXES.iter().any(|s| word.ends_with(s)) {
        return PosClass::Other;
    }
    PosClass::Noun
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_lists_do_not_overlap() {
        for list in [PRONOUNS, VERBS, FUNCTION_WORDS] {
            for w in ARTICLES {
                assert!(!list.contains(w), "{w}");
            }
        }
        for w in VERBS {
            assert!(!PRONOUNS.contains(w) && !FUNCTION_WORDS.contains(w), "{w}");
        }
        for w in PRONOUNS {
            assert!(!FUNCTION_WORDS.contains(w), "{w}");
        }
    }

    #[test]
    fn suffix_rules() {
        assert_eq!(classify_builtin("smiled"), PosClass::Verb);
        assert_eq!(classify_builtin("running"), PosClass::Verb);
        assert_eq!(classify_builtin("building"), PosClass::Noun);
        assert_eq!(classify_builtin("quickly"), PosClass::Other);
        assert_eq!(classify_builtin("helpful"), PosClass::Other);
        assert_eq!(classify_builtin("engineer"), PosClass::Noun);
    }

    #[test]
    fn clitics() {
        assert_eq!(classify_builtin("alex's"), PosClass::Noun);
        assert_eq!(classify_builtin("it's"), PosClass::Other);
        assert_eq!(classify_builtin("you're"), PosClass::Other);
        assert_eq!(classify_builtin("don't"), PosClass::Other);
    }

    #[test]
    fn numbers_are_other() {
        assert_eq!(classify_builtin("2003"), PosClass::Other);
    }
}
