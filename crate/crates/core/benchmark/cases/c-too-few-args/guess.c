#include <stdio.h>

#define MAX_LEVEL 10

static int clamp(int value, int low, int high)
{
    if (value < low)
        return low;
    if (value > high)
        return high;
    return value;
}

int main(void)
{
    int readings[] = {-4, 7, 15};
    for (int i = 0; i < 3; i++) {
        printf("%d\n", clamp(readings[i], 0, 100));
    }
    return 0;
}
