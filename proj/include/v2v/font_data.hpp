#pragma once

// Embedded copy of data/glyphs.txt. The file in data/ is the documented
// plain-text interface; this literal must stay byte-identical to it
// (tests compare the two).

namespace v2v::detail {

inline constexpr const char* kGlyphTable = R"GLYPHS(# v2v glyph table v1
# base cell 8x8 pixels; one record per printable ASCII codepoint 0x20..0x7E
# record: 'glyph 0xNN advance A' followed by 8 rows of 8 chars ('.' off, '#' on)
glyph 0x20 advance 5
........
........
........
........
........
........
........
........
glyph 0x21 advance 5
........
..#.....
..#.....
..#.....
........
..#.....
........
........
glyph 0x22 advance 5
........
.##.....
.##.....
........
........
........
........
........
glyph 0x23 advance 5
........
.#.#....
####....
.##.....
####....
###.....
........
........
glyph 0x24 advance 5
..#.....
.###....
###.....
.##.....
..##....
####....
..#.....
........
glyph 0x25 advance 5
........
##......
##.#....
.##.....
#.##....
..##....
........
........
glyph 0x26 advance 5
........
.##.....
.#......
#.##....
#.##....
####....
........
........
glyph 0x27 advance 5
........
..#.....
..#.....
........
........
........
........
........
glyph 0x28 advance 5
..#.....
..#.....
.#......
.#......
..#.....
..#.....
........
........
glyph 0x29 advance 5
.#......
..#.....
..#.....
..#.....
..#.....
.#......
........
........
glyph 0x2A advance 5
........
####....
.##.....
.##.....
####....
........
........
........
glyph 0x2B advance 5
........
..#.....
..#.....
####....
..#.....
..#.....
........
........
glyph 0x2C advance 5
........
........
........
........
........
.##.....
.#......
........
glyph 0x2D advance 5
........
........
........
.##.....
........
........
........
........
glyph 0x2E advance 5
........
........
........
........
........
.##.....
........
........
glyph 0x2F advance 5
........
...#....
..#.....
..#.....
.#......
.#......
#.......
........
glyph 0x30 advance 5
........
.##.....
##.#....
####....
##.#....
.##.....
........
........
glyph 0x31 advance 5
........
.##.....
..#.....
..#.....
..#.....
.###....
........
........
glyph 0x32 advance 5
........
###.....
..##....
..#.....
.#......
####....
........
........
glyph 0x33 advance 5
........
###.....
..##....
.##.....
...#....
####....
........
........
glyph 0x34 advance 5
........
..#.....
.##.....
..#.....
####....
..#.....
........
........
glyph 0x35 advance 5
........
####....
##......
###.....
..##....
###.....
........
........
glyph 0x36 advance 5
........
.###....
##......
####....
##.#....
.###....
........
........
glyph 0x37 advance 5
........
####....
..#.....
..#.....
..#.....
.#......
........
........
glyph 0x38 advance 5
........
.###....
####....
.##.....
##.#....
.###....
........
........
glyph 0x39 advance 5
........
.##.....
####....
.###....
..##....
.##.....
........
........
glyph 0x3A advance 5
........
........
.##.....
........
........
.##.....
........
........
glyph 0x3B advance 5
........
........
.##.....
........
........
.##.....
.#......
........
glyph 0x3C advance 5
........
........
..##....
##......
..##....
........
........
........
glyph 0x3D advance 5
........
........
####....
........
####....
........
........
........
glyph 0x3E advance 5
........
........
##......
..##....
##......
........
........
........
glyph 0x3F advance 5
........
.###....
..##....
..#.....
........
.##.....
........
........
glyph 0x40 advance 5
........
.###....
##.#....
####....
####....
##......
.###....
........
glyph 0x41 advance 5
........
.##.....
.##.....
.###....
####....
#..#....
........
........
glyph 0x42 advance 5
........
####....
##.#....
####....
##.#....
####....
........
........
glyph 0x43 advance 5
........
.###....
##......
#.......
##......
.###....
........
........
glyph 0x44 advance 5
........
###.....
#.##....
#..#....
#.##....
###.....
........
........
glyph 0x45 advance 5
........
####....
##......
####....
##......
####....
........
........
glyph 0x46 advance 5
........
.###....
.#......
.###....
.#......
.#......
........
........
glyph 0x47 advance 5
........
.###....
##......
#.##....
##.#....
.###....
........
........
glyph 0x48 advance 5
........
#..#....
#..#....
####....
#..#....
#..#....
........
........
glyph 0x49 advance 5
........
####....
..#.....
..#.....
..#.....
####....
........
........
glyph 0x4A advance 5
........
.###....
..##....
..##....
..#.....
###.....
........
........
glyph 0x4B advance 5
........
#..#....
###.....
###.....
#.#.....
#..#....
........
........
glyph 0x4C advance 5
........
##......
##......
##......
##......
####....
........
........
glyph 0x4D advance 5
........
##.#....
####....
####....
#..#....
#..#....
........
........
glyph 0x4E advance 5
........
##.#....
##.#....
####....
#.##....
#.##....
........
........
glyph 0x4F advance 5
........
.##.....
##.#....
#..#....
##.#....
.##.....
........
........
glyph 0x50 advance 5
........
####....
##.#....
####....
##......
##......
........
........
glyph 0x51 advance 5
........
.##.....
##.#....
#..#....
##.#....
.##.....
..##....
........
glyph 0x52 advance 5
........
####....
#.##....
###.....
#.##....
#..#....
........
........
glyph 0x53 advance 5
........
.###....
##......
.##.....
...#....
####....
........
........
glyph 0x54 advance 5
........
####....
..#.....
..#.....
..#.....
..#.....
........
........
glyph 0x55 advance 5
........
#..#....
#..#....
#..#....
##.#....
.###....
........
........
glyph 0x56 advance 5
........
#..#....
##.#....
.###....
.##.....
.##.....
........
........
glyph 0x57 advance 5
........
#..#....
####....
####....
####....
####....
........
........
glyph 0x58 advance 5
........
##.#....
.##.....
.##.....
.##.....
#..#....
........
........
glyph 0x59 advance 5
........
#..#....
.##.....
.##.....
..#.....
..#.....
........
........
glyph 0x5A advance 5
........
####....
........
..#.....
.#......
####....
........
........
glyph 0x5B advance 5
.##.....
.#......
.#......
.#......
.#......
.##.....
........
........
glyph 0x5C advance 5
........
#.......
.#......
.#......
..#.....
..#.....
...#....
........
glyph 0x5D advance 5
.##.....
..#.....
..#.....
..#.....
..#.....
.##.....
........
........
glyph 0x5E advance 5
........
.##.....
##.#....
........
........
........
........
........
glyph 0x5F advance 5
........
........
........
........
........
........
........
####....
glyph 0x60 advance 5
.#......
........
........
........
........
........
........
........
glyph 0x61 advance 5
........
........
###.....
...#....
####....
####....
........
........
glyph 0x62 advance 5
##......
##......
####....
##.#....
##.#....
####....
........
........
glyph 0x63 advance 5
........
........
.###....
.#......
.#......
.###....
........
........
glyph 0x64 advance 5
...#....
...#....
.###....
####....
####....
.###....
........
........
glyph 0x65 advance 5
........
........
.###....
####....
##......
.###....
........
........
glyph 0x66 advance 5
..##....
.##.....
####....
.##.....
.##.....
.##.....
........
........
glyph 0x67 advance 5
........
........
.###....
####....
####....
.###....
.##.....
........
glyph 0x68 advance 5
##......
##......
####....
##.#....
##.#....
##.#....
........
........
glyph 0x69 advance 5
..#.....
........
.##.....
..#.....
..#.....
####....
........
........
glyph 0x6A advance 5
..#.....
........
.##.....
..#.....
..#.....
..#.....
###.....
........
glyph 0x6B advance 5
.#......
.#......
.###....
.##.....
.##.....
.#.#....
........
........
glyph 0x6C advance 5
##......
.#......
.#......
.#......
.##.....
..##....
........
........
glyph 0x6D advance 5
........
........
####....
####....
#.##....
#.##....
........
........
glyph 0x6E advance 5
........
........
####....
##.#....
##.#....
##.#....
........
........
glyph 0x6F advance 5
........
........
.###....
##.#....
##.#....
.###....
........
........
glyph 0x70 advance 5
........
........
####....
##.#....
##.#....
####....
##......
........
glyph 0x71 advance 5
........
........
.###....
####....
####....
.###....
...#....
........
glyph 0x72 advance 5
........
........
.###....
.#......
.#......
.#......
........
........
glyph 0x73 advance 5
........
........
.###....
.#......
..##....
###.....
........
........
glyph 0x74 advance 5
........
.#......
####....
.#......
.#......
.###....
........
........
glyph 0x75 advance 5
........
........
##.#....
##.#....
####....
.###....
........
........
glyph 0x76 advance 5
........
........
#..#....
.###....
.##.....
.##.....
........
........
glyph 0x77 advance 5
........
........
#..#....
####....
####....
.###....
........
........
glyph 0x78 advance 5
........
........
##.#....
.##.....
.##.....
##.#....
........
........
glyph 0x79 advance 5
........
........
#..#....
.##.....
.##.....
.##.....
##......
........
glyph 0x7A advance 5
........
........
.###....
........
........
.###....
........
........
glyph 0x7B advance 5
..##....
..#.....
.#......
.##.....
..#.....
..##....
........
........
glyph 0x7C advance 5
..#.....
..#.....
..#.....
..#.....
..#.....
..#.....
..#.....
........
glyph 0x7D advance 5
.#......
.##.....
..##....
..#.....
.##.....
.#......
........
........
glyph 0x7E advance 5
........
........
........
####....
........
........
........
........
)GLYPHS";

}  // namespace v2v::detail
