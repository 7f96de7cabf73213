/* Backtracking matcher for c . ^ $ * over a handful of patterns. */
#include "zkrt.h"

static int matchhere(const char *re, const char *text);

static int matchstar(int c, const char *re, const char *text)
{
    do {
        if (matchhere(re, text))
            return 1;
    } while (*text != '\0' && (*text++ == c || c == '.'));
    return 0;
}

static int matchhere(const char *re, const char *text)
{
    if (re[0] == '\0')
        return 1;
    if (re[1] == '*')
        return matchstar(re[0], re + 2, text);
    if (re[0] == '$' && re[1] == '\0')
        return *text == '\0';
    if (*text != '\0' && (re[0] == '.' || re[0] == *text))
        return matchhere(re + 1, text + 1);
    return 0;
}

static int match(const char *re, const char *text)
{
    if (re[0] == '^')
        return matchhere(re + 1, text);
    do {
        if (matchhere(re, text))
            return 1;
    } while (*text++ != '\0');
    return 0;
}

static const char *patterns[] = {"ab*c", "^a.*z$", "x*y", "q", "^$", "b.b", "a*a*a*b", "l+o"};
static const char *texts[] = {"abbbc", "ac", "a to z", "yyy", "", "bob", "aaaaaaaaab", "hello world",
                              "the quick brown fox", "zzz"};

int main(void)
{
    unsigned bits = 0, hits = 0;
    for (unsigned p = 0; p < sizeof patterns / sizeof *patterns; p++)
        for (unsigned t = 0; t < sizeof texts / sizeof *texts; t++) {
            int m = match(patterns[p], texts[t]);
            hits += m;
            bits = bits * 3 + (unsigned)m;
        }
    zk_print("regex_lite: ");
    zk_print_u32(hits);
    zk_print(" ");
    zk_print_hex(bits);
    zk_print("\n");
    return 0;
}
