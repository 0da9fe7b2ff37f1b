"""Text of the conpro_support package used by every emitted entity."""

SUPPORT_PACKAGE = """\
library IEEE;
use IEEE.std_logic_1164.all;
use IEEE.numeric_std.all;

package conpro_support is
  type conpro_queue is array(natural range <>) of integer;
  function I_to_L(v: signed) return std_logic_vector;
  function L_to_I(v: std_logic_vector) return signed;
  function L_resize(v: std_logic_vector; w: natural) return std_logic_vector;
  function B_to_L(b: boolean) return std_logic;
  function B_to_V(b: std_logic) return std_logic_vector;
  function V_to_B(v: std_logic_vector) return std_logic;
  function C_shl(v: signed; n: integer) return signed;
  function C_shl(v: std_logic_vector; n: integer) return std_logic_vector;
  function C_shr(v: signed; n: integer) return signed;
  function C_shr(v: std_logic_vector; n: integer) return std_logic_vector;
  function C_div(a: signed; b: signed) return signed;
  function C_div(a: std_logic_vector; b: std_logic_vector) return std_logic_vector;
  function C_rem(a: signed; b: signed) return signed;
  function C_rem(a: std_logic_vector; b: std_logic_vector) return std_logic_vector;
  function conpro_clip(v: integer; lo: integer; hi: integer) return integer;
  function conpro_lfsr(v: std_logic_vector) return std_logic_vector;
  procedure conpro_enqueue(q: inout conpro_queue; n: inout integer; k: in integer);
  procedure conpro_dequeue(q: inout conpro_queue; n: inout integer; k: in integer);
end conpro_support;

package body conpro_support is
  function I_to_L(v: signed) return std_logic_vector is
  begin
    return std_logic_vector(v);
  end I_to_L;

  function L_to_I(v: std_logic_vector) return signed is
  begin
    return signed(v);
  end L_to_I;

  function L_resize(v: std_logic_vector; w: natural) return std_logic_vector is
  begin
    return std_logic_vector(resize(unsigned(v), w));
  end L_resize;

  function B_to_L(b: boolean) return std_logic is
  begin
    if b then
      return '1';
    end if;
    return '0';
  end B_to_L;

  function B_to_V(b: std_logic) return std_logic_vector is
    variable r: std_logic_vector(0 downto 0);
  begin
    r(0) := b;
    return r;
  end B_to_V;

  function V_to_B(v: std_logic_vector) return std_logic is
  begin
    if unsigned(v) = 0 then
      return '0';
    end if;
    return '1';
  end V_to_B;

  function C_shl(v: signed; n: integer) return signed is
  begin
    if n < 0 or n >= v'length then
      return to_signed(0, v'length);
    end if;
    return shift_left(v, n);
  end C_shl;

  function C_shl(v: std_logic_vector; n: integer) return std_logic_vector is
  begin
    if n < 0 or n >= v'length then
      return std_logic_vector(to_unsigned(0, v'length));
    end if;
    return std_logic_vector(shift_left(unsigned(v), n));
  end C_shl;

  function C_shr(v: signed; n: integer) return signed is
  begin
    if n < 0 or n >= v'length then
      return to_signed(0, v'length);
    end if;
    return signed(shift_right(unsigned(v), n));
  end C_shr;

  function C_shr(v: std_logic_vector; n: integer) return std_logic_vector is
  begin
    if n < 0 or n >= v'length then
      return std_logic_vector(to_unsigned(0, v'length));
    end if;
    return std_logic_vector(shift_right(unsigned(v), n));
  end C_shr;

  function C_div(a: signed; b: signed) return signed is
  begin
    if b = 0 then
      return to_signed(0, a'length);
    end if;
    return resize(a / b, a'length);
  end C_div;

  function C_div(a: std_logic_vector; b: std_logic_vector) return std_logic_vector is
  begin
    if unsigned(b) = 0 then
      return std_logic_vector(to_unsigned(0, a'length));
    end if;
    return std_logic_vector(resize(unsigned(a) / unsigned(b), a'length));
  end C_div;

  function C_rem(a: signed; b: signed) return signed is
  begin
    if b = 0 then
      return to_signed(0, a'length);
    end if;
    return resize(a rem b, a'length);
  end C_rem;

  function C_rem(a: std_logic_vector; b: std_logic_vector) return std_logic_vector is
  begin
    if unsigned(b) = 0 then
      return std_logic_vector(to_unsigned(0, a'length));
    end if;
    return std_logic_vector(resize(unsigned(a) rem unsigned(b), a'length));
  end C_rem;

  function conpro_clip(v: integer; lo: integer; hi: integer) return integer is
  begin
    if v < lo then
      return lo;
    elsif v > hi then
      return hi;
    end if;
    return v;
  end conpro_clip;

  function conpro_lfsr(v: std_logic_vector) return std_logic_vector is
    variable r: std_logic_vector(v'length - 1 downto 0);
    variable fb: std_logic;
  begin
    r := v;
    fb := r(r'high) xor r(0);
    if unsigned(r) = 0 then
      fb := '1';
    end if;
    r := r(r'high - 1 downto 0) & fb;
    return r;
  end conpro_lfsr;

  procedure conpro_enqueue(q: inout conpro_queue; n: inout integer; k: in integer) is
  begin
    for j in q'range loop
      if j < n and q(j) = k then
        return;
      end if;
    end loop;
    if n <= q'high then
      q(n) := k;
      n := n + 1;
    end if;
  end conpro_enqueue;

  procedure conpro_dequeue(q: inout conpro_queue; n: inout integer; k: in integer) is
    variable found: boolean;
  begin
    found := false;
    for j in q'range loop
      if j < n and q(j) = k then
        found := true;
      end if;
      if found and j < q'high then
        q(j) := q(j + 1);
      end if;
    end loop;
    if found then
      n := n - 1;
    end if;
  end conpro_dequeue;
end conpro_support;
"""
