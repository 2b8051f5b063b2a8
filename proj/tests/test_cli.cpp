#include <gtest/gtest.h>

TEST(Placeholder, PendingModule) { GTEST_SKIP() << "suite not yet written"; }
