#include <math.h>
#include <stdio.h>
#include "morphage.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "line %d: %s\n", __LINE__, #cond); return 1; } } while (0)

int main(void) {
    const double bona[] = {0.75, 0.25, 0.15, 0.1};
    const double attack[] = {0.8, 0.7, 0.3, 0.2};
    double eer = -1.0, apcer = -1.0, bpcer = -1.0;
    CHECK(morphage_equal_error_rate(bona, 4, attack, 4, &eer) == MORPHAGE_STATUS_OK);
    CHECK(eer == 25.0);
    CHECK(morphage_error_rates(bona, 4, attack, 4, 0.3, &apcer, &bpcer) == MORPHAGE_STATUS_OK);
    CHECK(apcer == 25.0 && bpcer == 25.0);

    /* two morphs, one attempt, two subjects */
    const double scores[] = {0.9, 0.8, 0.9, 0.1};
    double f = -1.0;
    CHECK(morphage_fmmpmr(scores, 2, 1, 2, 0.5, &f) == MORPHAGE_STATUS_OK);
    CHECK(f == 50.0);

    uint8_t px[12] = {0};
    MorphageImage *img = NULL;
    CHECK(morphage_image_new(2, 2, 3, px, 12, &img) == MORPHAGE_STATUS_OK);
    size_t w = 0, h = 0, c = 0;
    CHECK(morphage_image_shape(img, &w, &h, &c) == MORPHAGE_STATUS_OK);
    CHECK(w == 2 && h == 2 && c == 3);
    morphage_image_free(img);

    CHECK(morphage_image_new(3, 3, 1, px, 12, &img) == MORPHAGE_STATUS_CONTRACT);
    CHECK(morphage_last_error_message() != NULL);
    puts("ok");
    return 0;
}
