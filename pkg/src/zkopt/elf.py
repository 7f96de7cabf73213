"""ELF32 little-endian RISC-V executable loading."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

EM_RISCV = 243
ET_EXEC = 2
PT_LOAD = 1
PF_X, PF_W, PF_R = 1, 2, 4
SHT_SYMTAB = 2

_EHDR = struct.Struct("<16sHHIIIIIHHHHHH")  # 52 bytes
_PHDR = struct.Struct("<IIIIIIII")  # 32 bytes
_SHDR = struct.Struct("<IIIIIIIIII")  # 40 bytes
_SYM = struct.Struct("<IIIBBH")  # 16 bytes


class ElfError(Exception):
    pass


class BadMagic(ElfError):
    pass


class WrongClass(ElfError):
    pass


class WrongMachine(ElfError):
    pass


class NotExecutable(ElfError):
    pass


class NoLoadSegments(ElfError):
    pass


class OverlappingSegments(ElfError):
    pass


@dataclass(frozen=True)
class Segment:
    vaddr: int
    data: bytes  # memsz bytes, zero-filled past filesz
    filesz: int
    writable: bool
    executable: bool

    @property
    def end(self) -> int:
        return self.vaddr + len(self.data)

    def contains(self, addr: int) -> bool:
        return self.vaddr <= addr < self.end


@dataclass(frozen=True)
class LoadedImage:
    entry: int
    segments: tuple[Segment, ...]
    symbols: dict[str, int] = field(default_factory=dict)

    def segment_at(self, addr: int) -> Segment | None:
        for seg in self.segments:
            if seg.contains(addr):
                return seg
        return None

    def read(self, addr: int, size: int) -> bytes:
        seg = self.segment_at(addr)
        if seg is None or addr + size > seg.end:
            raise ElfError(f"address range 0x{addr:x}+{size} not mapped")
        off = addr - seg.vaddr
        return seg.data[off:off + size]

    def function_at(self, addr: int) -> str | None:
        """Name of the nearest symbol at or below ``addr`` (annotation only)."""
        best, name = -1, None
        for sym, value in self.symbols.items():
            if best < value <= addr:
                best, name = value, sym
        return name


def load_elf(data: bytes) -> LoadedImage:
    if len(data) < 4 or data[:4] != b"\x7fELF":
        raise BadMagic("not an ELF file")
    if len(data) < _EHDR.size:
        raise ElfError("truncated ELF header")
    (ident, e_type, e_machine, _ver, e_entry, e_phoff, e_shoff, _flags, _ehsize,
     e_phentsize, e_phnum, e_shentsize, e_shnum, _shstrndx) = _EHDR.unpack_from(data, 0)
    if ident[4] != 1:
        raise WrongClass(f"ELF class {ident[4]} (only 32-bit supported)")
    if ident[5] != 1:
        raise ElfError("big-endian ELF not supported")
    if e_machine != EM_RISCV:
        raise WrongMachine(f"e_machine={e_machine}, expected RISC-V ({EM_RISCV})")
    if e_type != ET_EXEC:
        raise NotExecutable(f"e_type={e_type}, only static ET_EXEC binaries are accepted")

    segments = []
    for i in range(e_phnum):
        off = e_phoff + i * e_phentsize
        if off + _PHDR.size > len(data):
            raise ElfError("program header table out of bounds")
        p_type, p_offset, p_vaddr, _paddr, p_filesz, p_memsz, p_flags, _align = _PHDR.unpack_from(data, off)
        if p_type != PT_LOAD or p_memsz == 0:
            continue
        if p_filesz > p_memsz or p_offset + p_filesz > len(data):
            raise ElfError(f"segment {i} has inconsistent sizes")
        body = data[p_offset:p_offset + p_filesz] + bytes(p_memsz - p_filesz)
        segments.append(Segment(p_vaddr, bytes(body), p_filesz, bool(p_flags & PF_W), bool(p_flags & PF_X)))
    if not segments:
        raise NoLoadSegments("no PT_LOAD segments")
    segments.sort(key=lambda s: s.vaddr)
    for a, b in zip(segments, segments[1:]):
        if b.vaddr < a.end:
            raise OverlappingSegments(f"segments at 0x{a.vaddr:x} and 0x{b.vaddr:x} overlap")
    if not any(s.executable and s.contains(e_entry) for s in segments):
        raise ElfError(f"entry 0x{e_entry:x} is not inside an executable segment")
    return LoadedImage(e_entry, tuple(segments), _symbols(data, e_shoff, e_shnum, e_shentsize))


def _symbols(data: bytes, shoff: int, shnum: int, shentsize: int) -> dict[str, int]:
    if not shoff or shoff + shnum * shentsize > len(data):
        return {}
    headers = [_SHDR.unpack_from(data, shoff + i * shentsize) for i in range(shnum)]
    out = {}
    for sh in headers:
        if sh[1] != SHT_SYMTAB:
            continue
        strtab = headers[sh[6]] if sh[6] < len(headers) else None
        if strtab is None:
            continue
        str_off, str_size = strtab[4], strtab[5]
        for j in range(sh[5] // _SYM.size):
            st_name, st_value, _size, st_info, _other, st_shndx = _SYM.unpack_from(data, sh[4] + j * _SYM.size)
            if st_shndx == 0 or (st_info & 0xF) not in (1, 2):  # OBJECT, FUNC
                continue
            end = data.find(b"\0", str_off + st_name, str_off + str_size)
            name = data[str_off + st_name:end].decode(errors="replace")
            if name:
                out[name] = st_value
    return dict(sorted(out.items()))


def build_elf(segments, entry: int, *, machine: int = EM_RISCV, elf_class: int = 1,
              e_type: int = ET_EXEC) -> bytes:
    """Write a minimal ELF32 executable.

    ``segments`` is an iterable of ``(vaddr, data, flags)`` or
    ``(vaddr, data, flags, memsz)`` tuples.  Used for hand-assembled guest
    programs and loader fixtures; no section headers are emitted.
    """
    segs = [tuple(s) + ((len(s[1]),) if len(s) == 3 else ()) for s in segments]
    phoff = _EHDR.size
    data_off = phoff + _PHDR.size * len(segs)
    ident = b"\x7fELF" + bytes([elf_class, 1, 1]) + bytes(9)
    out = bytearray(_EHDR.pack(ident, e_type, machine, 1, entry, phoff if segs else 0, 0, 0,
                               _EHDR.size, _PHDR.size, len(segs), _SHDR.size, 0, 0))
    body = bytearray()
    for vaddr, blob, flags, memsz in segs:
        out += _PHDR.pack(PT_LOAD, data_off + len(body), vaddr, vaddr, len(blob), memsz, flags, 4)
        body += blob
        body += bytes(-len(body) % 4)
    return bytes(out + body)
