import random
from pathlib import Path

import pytest

from src.hdl.elaborate import elaborate
from src.hdl.loader import load_rtl
from src.hdl.parser import parse_rtl
from src.ifa.labels import load_target_config, resolve_labels
from src.pipeline.cache import clear_all_caches

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
PROGRAMS = FIXTURES / "programs"


def fixture_target(name: str):
    """(target config, netlist, labels) for ``fixtures/<name>.json``."""
    target = load_target_config(FIXTURES / f"{name}.json")
    netlist, _ = load_rtl(target.rtl, target.top)
    return target, netlist, resolve_labels(target, netlist)


def netlist_of(text: str, top=None):
    return elaborate(parse_rtl(text), top)


def random_circuit(rng: random.Random, index: int = 0) -> str:
    """Small clocked design: two 2-bit registers between a secret input and an output.

    Enables, mux selects and the output mix are drawn at random, so some
    designs leak and some cannot.
    """
    sel_a = rng.choice(["a", "!a", "a && b", "b", "1'b0"])
    sel_b = rng.choice(["b", "!b", "a ^ b", "r1 == 2'd3", "r0[0]"])
    en0 = rng.choice(["en", "!en", "1'b1", "a"])
    en1 = rng.choice(["en", "b", "1'b1", "!a"])
    mix = rng.choice(["r1", "r1 ^ pub", "sel_b ? r1 : pub", "{r1[0], pub[0]}", "pub"])
    return f"""
module rc{index} (
    input clk,
    input rst,
    input [1:0] secret,
    input [1:0] pub,
    input a,
    input b,
    input en,
    output [1:0] out
);
  reg [1:0] r0, r1;
  wire sel_b;
  wire [1:0] mid;
  assign sel_b = {sel_b};
  assign mid = ({sel_a}) ? r0 : pub;
  always @(posedge clk) begin
    if (rst) begin
      r0 <= 2'd0;
      r1 <= 2'd0;
    end else begin
      if ({en0}) r0 <= secret;
      if ({en1}) r1 <= mid;
    end
  end
  assign out = {mix};
endmodule
"""


@pytest.fixture(autouse=True)
def _fresh_caches():
    clear_all_caches()
    yield
    clear_all_caches()


@pytest.fixture
def rng():
    return random.Random(20240607)
