package com.acme.billing;

import java.util.ArrayList;
import java.util.List;
import com.acme.billing.util.*;

public class SubscriptionManager extends BaseManager {
    private final List<Subscription> subscriptions = new ArrayList<>();

    public void add(Subscription subscription) {
        subscriptions.add(subscription);
        record("add");
    }

    public Money totalMonthly() {
        Money total = Money.zero();
        for (Subscription s : subscriptions) {
            total = total.plus(s.getMonthlyFee());
        }
        return total;
    }

    public int countPremium() {
        int count = 0;
        for (Subscription s : subscriptions) {
            if (s.isPremium()) {
                count++;
            }
        }
        return count;
    }
}
