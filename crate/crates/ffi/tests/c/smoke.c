#include <stdio.h>
#include <string.h>

#include "rbmtkit.h"

#define CHECK(cond)                                                   \
  do {                                                                \
    if (!(cond)) {                                                    \
      const char *e = rbmt_last_error();                              \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond,  \
              e ? e : "no error");                                    \
      return 1;                                                       \
    }                                                                 \
  } while (0)

int main(void) {
  char *out = NULL;
  double score = 0.0;

  CHECK(rbmt_sentence_ter("a b c d", "a c b d", &score) == RBMT_STATUS_OK);
  CHECK(score == 0.25);

  RbmtLexicon *lex = NULL;
  CHECK(rbmt_lexicon_parse("(\"the\" DET CL (INV))", &lex) == RBMT_STATUS_OK);
  CHECK(rbmt_annotate_catcl(lex, "the cat", '|', &out) == RBMT_STATUS_OK);
  CHECK(strcmp(out, "the|DET|INV cat|NONE|NONE") == 0);
  rbmt_string_free(out);
  rbmt_lexicon_free(lex);

  RbmtBpeModel *model = NULL;
  CHECK(rbmt_bpe_model_parse("#bpe version=1 marker=suffix\nl o\nlo w</w>\n", &model) == RBMT_STATUS_OK);
  CHECK(rbmt_bpe_apply(model, "lower", 0, &out) == RBMT_STATUS_OK);
  CHECK(strcmp(out, "lo@@ w@@ e@@ r") == 0);
  rbmt_string_free(out);
  rbmt_bpe_model_free(model);

  CHECK(rbmt_linearize_tree(NULL, 0, &out) == RBMT_STATUS_NULL_POINTER);
  CHECK(strcmp(rbmt_last_error(), "tree is null") == 0);

  puts("ok");
  return 0;
}
