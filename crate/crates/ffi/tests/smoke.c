#include <math.h>
#include <stdio.h>
#include <string.h>

#include "seqrank.h"

#define CHECK(cond)                                              \
    do {                                                         \
        if (!(cond)) {                                           \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                            \
        }                                                        \
    } while (0)

int main(int argc, char **argv) {
    SrkRank r;
    double sigmas[] = {4.0, 2.0, 1.0, 1.0};
    CHECK(srk_effective_rank(sigmas, 4, &r) == SRK_STATUS_OK);
    CHECK(fabs(r.value - 3.363586) < 1e-6 && r.retained == 4);

    /* two sequences of dim 2: lengths 1 and 2 */
    size_t lengths[] = {1, 2};
    double frames[] = {1.0, 0.0, 0.0, 0.5, 0.0, 0.5};
    SrkSequenceSet *set = NULL;
    CHECK(srk_sequence_set_new(2, lengths, 2, frames, &set) == SRK_STATUS_OK);
    CHECK(srk_sequence_set_len(set) == 2 && srk_sequence_set_dim(set) == 2);
    CHECK(srk_rankme_t(set, SRK_POOLING_SUM, &r) == SRK_STATUS_OK);
    CHECK(fabs(r.value - 2.0) < 1e-12);
    CHECK(srk_rankme_t(set, 9, &r) == SRK_STATUS_INVALID_ARGUMENT);

    CHECK(argc > 1);
    CHECK(srk_write_container(set, argv[1], 1) == SRK_STATUS_OK);
    SrkSequenceSet *back = NULL;
    CHECK(srk_read_container(argv[1], &back) == SRK_STATUS_OK);
    CHECK(srk_sequence_set_len(back) == 2);
    srk_sequence_set_free(back);
    srk_sequence_set_free(set);

    CHECK(srk_read_container("/nonexistent/x.rkmt", &back) == SRK_STATUS_IO);
    CHECK(strlen(srk_last_error()) > 0);

    double x[] = {1, 2, 3, 4}, y[] = {1, 3, 2, 4};
    SrkKendall k;
    CHECK(srk_kendall_tau(x, y, 4, &k) == SRK_STATUS_OK);
    CHECK(k.has_tau && fabs(k.tau - 4.0 / 6.0) < 1e-15);
    CHECK(k.concordant == 5 && k.discordant == 1 && k.p_method == SRK_P_METHOD_EXACT);
    printf("ok\n");
    return 0;
}
