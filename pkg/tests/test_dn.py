import pytest
from hypothesis import given, strategies as st

from gridgate.certs import DistinguishedName, MalformedDnError


def test_parse_render_round_trip():
    dn = DistinguishedName.parse("/C=IT/O=SNS/CN=Alice")
    assert dn.rdns == (("C", "IT"), ("O", "SNS"), ("CN", "Alice"))
    assert dn.render() == "/C=IT/O=SNS/CN=Alice"
    assert DistinguishedName.parse(dn.render()) == dn


def test_render_escapes_separators():
    dn = DistinguishedName((("O", "a/b"), ("CN", "x\\y")))
    rendered = dn.render()
    assert rendered == "/O=a\\/b/CN=x\\\\y"
    assert DistinguishedName.parse(rendered) == dn


def test_value_may_contain_equals():
    dn = DistinguishedName.parse("/CN=a=b")
    assert dn.rdns == (("CN", "a=b"),)


@pytest.mark.parametrize(
    "bad",
    [
        "",
        "CN=Alice",
        "/CN=",
        "/CN=  ",
        "/XX=foo",
        "/C=ITA/CN=x",
        "/CN=trailing\\",
    ],
)
def test_malformed_inputs_rejected(bad):
    with pytest.raises(MalformedDnError):
        DistinguishedName.parse(bad)


def test_empty_dn_rejected():
    with pytest.raises(MalformedDnError):
        DistinguishedName(())


def test_with_cn_and_extension_check():
    base = DistinguishedName.parse("/C=IT/O=SNS/CN=Alice")
    ext = base.with_cn("12345")
    assert ext.render() == "/C=IT/O=SNS/CN=Alice/CN=12345"
    assert ext.is_extension_of(base)
    assert not base.is_extension_of(ext)
    assert not ext.with_cn("6").is_extension_of(base)


def test_x509_round_trip():
    dn = DistinguishedName.parse("/C=IT/O=SNS/OU=lab/CN=Alice Rossi")
    assert DistinguishedName.from_x509(dn.to_x509()) == dn


_value = st.text(
    alphabet=st.characters(
        whitelist_categories=("L", "N"), whitelist_characters=" .-_/\\'àéü"
    ),
    min_size=1,
    max_size=24,
).filter(lambda s: s.strip())


@given(
    st.lists(
        st.tuples(st.sampled_from(["O", "OU", "CN", "L", "DC"]), _value),
        min_size=1,
        max_size=5,
    )
)
def test_round_trip_property(rdns):
    dn = DistinguishedName(tuple(rdns))
    assert DistinguishedName.parse(dn.render()) == dn
    assert DistinguishedName.from_x509(dn.to_x509()) == dn
