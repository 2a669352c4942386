from eventret.textutil import (
    begins_with_cue,
    content_tokens,
    first_content_token,
    split_sentences,
    strip_asides,
    tokenize,
)


def test_tokenize_latin():
    assert tokenize("The cat sat on the mat.") == ["The", "cat", "sat", "on", "the", "mat"]


def test_tokenize_mixed_cjk():
    assert tokenize("rain 下雨了 stopped") == ["rain", "下", "雨", "了", "stopped"]


def test_tokenize_keeps_apostrophes_and_digits():
    assert tokenize("don't stop 42 times") == ["don't", "stop", "42", "times"]


def test_split_sentences_ascii_and_cjk():
    assert split_sentences("One. Two! Three? 四。五！") == [
        "One", "Two", "Three", "四", "五",
    ]


def test_strip_asides():
    assert strip_asides("The army attacked (at dawn) the fort [allegedly].") == (
        "The army attacked the fort ."
    )


def test_content_tokens_filters_stopwords_and_adds_cjk_bigrams():
    assert content_tokens("The army attacked") == ["army", "attacked"]
    assert content_tokens("洪水") == ["洪", "水", "洪水"]


def test_content_tokens_splits_identifier_names():
    assert content_tokens("Change_tool") == ["change", "tool"]


def test_first_content_token_falls_back_to_first():
    assert first_content_token("The army") == "army"
    assert first_content_token("the of and") == "the"
    assert first_content_token("") is None


def test_begins_with_cue():
    assert begins_with_cue("Therefore the town fell")
    assert begins_with_cue("so it goes")
    assert begins_with_cue("所以成功了")
    assert not begins_with_cue("Sorrow is not a cue")
    assert not begins_with_cue("The town fell")
